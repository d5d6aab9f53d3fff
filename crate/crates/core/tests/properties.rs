#![allow(clippy::needless_range_loop)]

use modediag::clusterer::assign_clusters;
use modediag::delta::{compute_delta_bruteforce, compute_delta_indexed};
use modediag::density::{kde_at, kde_self, Bandwidth};
use modediag::diagram::{build_diagram, DiagramEntry, DiagramSource, ModeDiagram};
use modediag::meanshift::mean_shift_step;
use modediag::robustfit::{
    fit_robust, select_modes, threshold_value, RobustFit, RobustMethod, ScaleEstimator,
    ThresholdFunction,
};
use modediag::{diameter, pairwise_distance, PointSet};
use proptest::prelude::*;

fn point_set(max_n: usize, max_d: usize) -> impl Strategy<Value = PointSet<f64>> {
    (2..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(-10.0..10.0f64, n * d).prop_map(move |c| PointSet::new(c, d).unwrap())
    })
}

/// Coordinates on a coarse grid so duplicates and distance ties are common.
fn gridded_set() -> impl Strategy<Value = PointSet<f64>> {
    (2..60usize, 1..4usize).prop_flat_map(|(n, d)| {
        prop::collection::vec(-3i32..3, n * d)
            .prop_map(move |c| PointSet::new(c.into_iter().map(f64::from).collect(), d).unwrap())
    })
}

fn densities(ps: &PointSet<f64>) -> Vec<f64> {
    kde_self(ps, &Bandwidth::fixed(1.5).unwrap())
        .unwrap()
        .values
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triangle_inequality_and_diameter_bound(ps in point_set(30, 4)) {
        let l = diameter(&ps).value();
        let n = ps.len();
        for i in 0..n {
            for j in 0..n {
                let dij = pairwise_distance(&ps, i, j).unwrap();
                prop_assert!(dij <= l);
                prop_assert_eq!(dij, pairwise_distance(&ps, j, i).unwrap());
                for k in 0..n.min(8) {
                    let via = pairwise_distance(&ps, i, k).unwrap() + pairwise_distance(&ps, k, j).unwrap();
                    prop_assert!(dij <= via * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn kde_translation_and_scaling(ps in point_set(40, 3), shift in -5.0..5.0f64, c in 0.2..5.0f64) {
        let d = ps.dim();
        let h = 0.7;
        let q: Vec<f64> = ps.row(0).iter().map(|v| v + 0.3).collect();
        let base = kde_at(&ps, &Bandwidth::fixed(h).unwrap(), &q).unwrap();

        let moved = PointSet::new(ps.as_flat().iter().map(|v| v + shift).collect(), d).unwrap();
        let qm: Vec<f64> = q.iter().map(|v| v + shift).collect();
        let t = kde_at(&moved, &Bandwidth::fixed(h).unwrap(), &qm).unwrap();
        prop_assert!((t - base).abs() <= 1e-12 * base.max(1e-300) + 1e-300, "{} vs {}", t, base);

        let scaled = PointSet::new(ps.as_flat().iter().map(|v| v * c).collect(), d).unwrap();
        let qs: Vec<f64> = q.iter().map(|v| v * c).collect();
        let s = kde_at(&scaled, &Bandwidth::fixed(h * c).unwrap(), &qs).unwrap();
        let expect = base * c.powi(-(d as i32));
        prop_assert!((s - expect).abs() <= 1e-10 * expect, "{} vs {}", s, expect);
    }

    #[test]
    fn kde_self_permutes_with_rows(ps in point_set(40, 3), seed in any::<u64>()) {
        let n = ps.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let p = ps.permuted(&perm).unwrap();
        let a = densities(&ps);
        let b = densities(&p);
        for k in 0..n {
            prop_assert!((b[k] - a[perm[k]]).abs() <= 1e-12 * a[perm[k]]);
        }
    }

    #[test]
    fn indexed_delta_equals_bruteforce(ps in point_set(200, 5)) {
        let dens = densities(&ps);
        prop_assert_eq!(compute_delta_indexed(&ps, &dens).unwrap(), compute_delta_bruteforce(&ps, &dens).unwrap());
    }

    #[test]
    fn indexed_delta_equals_bruteforce_with_ties(ps in gridded_set(), levels in 1..4u32) {
        // Quantized densities force exact ties.
        let dens: Vec<f64> = densities(&ps).iter().map(|v| (v * f64::from(levels)).round()).collect();
        let brute = compute_delta_bruteforce(&ps, &dens).unwrap();
        prop_assert_eq!(compute_delta_indexed(&ps, &dens).unwrap(), brute.clone());
        // Parent chains climb strictly in the total order and end at the root.
        let ranks = brute.ranks();
        for i in 0..ps.len() {
            let mut cur = i;
            let mut steps = 0;
            while let Some(p) = brute.parent[cur] {
                prop_assert!(ranks[p] < ranks[cur]);
                cur = p;
                steps += 1;
                prop_assert!(steps <= ps.len());
            }
            prop_assert_eq!(cur, brute.root);
        }
    }

    #[test]
    fn delta_is_permutation_robust(ps in point_set(80, 3), seed in any::<u64>()) {
        let dens = densities(&ps);
        let mut sorted = dens.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assume!(sorted.windows(2).all(|w| w[0] < w[1]));
        let n = ps.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = seed | 1;
        for i in (1..n).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            perm.swap(i, state as usize % (i + 1));
        }
        let p = ps.permuted(&perm).unwrap();
        let pd: Vec<f64> = perm.iter().map(|&k| dens[k]).collect();
        let a = compute_delta_indexed(&ps, &dens).unwrap();
        let b = compute_delta_indexed(&p, &pd).unwrap();
        for k in 0..n {
            prop_assert_eq!(b.delta[k], a.delta[perm[k]]);
        }
    }

    #[test]
    fn threshold_predicate_matches_curve(
        beta0 in -5.0..5.0f64,
        beta1 in -2.0..0.5f64,
        s in 0.01..2.0f64,
        m in 0.5..6.0f64,
        pts in prop::collection::vec((-8.0..2.0f64, -6.0..3.0f64), 1..200),
    ) {
        let dia = diagram_from_logs(&pts);
        let fit = RobustFit { beta0, beta1, s, method: RobustMethod::Huber, scale: ScaleEstimator::Mad, iterations: 0, n_used: pts.len() };
        let tf = ThresholdFunction::new(fit, m).unwrap();
        for e in &dia.entries {
            let curve = e.delta > threshold_value(&tf, e.density).unwrap();
            let log = tf.is_above_log(e.log_density, e.log_delta);
            // The two sides agree except within rounding of the boundary.
            let gap = (e.log_delta - (beta0 + beta1 * e.log_density + m * s)).abs();
            prop_assert!(curve == log || gap < 1e-9, "gap {}", gap);
        }
    }

    #[test]
    fn modes_shrink_as_m_grows(ps in point_set(120, 2), m1 in 0.5..4.0f64, dm in 0.0..4.0f64) {
        let dens = densities(&ps);
        let dia = build_diagram(&kde_self(&ps, &Bandwidth::fixed(1.5).unwrap()).unwrap(),
            compute_delta_indexed(&ps, &dens).unwrap()).unwrap();
        prop_assume!(dia.entries.iter().any(|e| e.log_density != dia.entries[0].log_density) && ps.len() >= 3);
        let fit = fit_robust(&dia, RobustMethod::Huber, 100).unwrap();
        let small = select_modes(&dia, &ThresholdFunction::new(fit, m1).unwrap());
        let large = select_modes(&dia, &ThresholdFunction::new(fit, m1 + dm).unwrap());
        for i in &large {
            prop_assert!(small.contains(i) || *i == dia.delta_table.root);
        }
        let none = select_modes(&dia, &ThresholdFunction::new(fit, f64::INFINITY).unwrap());
        prop_assert_eq!(none, vec![dia.delta_table.root]);
    }

    #[test]
    fn labels_follow_parent_paths(ps in point_set(150, 3), picks in prop::collection::vec(any::<prop::sample::Index>(), 0..6)) {
        let dens = densities(&ps);
        let dt = compute_delta_indexed(&ps, &dens).unwrap();
        let mut modes: Vec<usize> = picks.iter().map(|ix| ix.index(ps.len())).collect();
        modes.push(dt.root);
        modes.sort_unstable();
        modes.dedup();
        let res = assign_clusters(&dt, &modes).unwrap();
        prop_assert_eq!(res.n_clusters(), modes.len());
        prop_assert_eq!(&assign_clusters(&dt, &modes).unwrap(), &res);
        for (j, &m) in res.modes.iter().enumerate() {
            prop_assert_eq!(res.labels[m], j);
        }
        for i in 0..ps.len() {
            let mut cur = i;
            while !modes.contains(&cur) {
                cur = dt.parent[cur].unwrap();
            }
            prop_assert_eq!(res.modes[res.labels[i]], cur);
        }
    }

    #[test]
    fn mean_shift_ascends_density(ps in point_set(60, 2), h in 0.5..3.0f64) {
        let bw = Bandwidth::fixed(h).unwrap();
        let mut x = ps.row(0).to_vec();
        for _ in 0..20 {
            let step = mean_shift_step(&x, &ps, &bw).unwrap();
            if step.stuck {
                break;
            }
            let before = kde_at(&ps, &bw, &x).unwrap();
            let after = kde_at(&ps, &bw, &step.point).unwrap();
            prop_assert!(after >= before - 1e-12, "{} < {}", after, before);
            x = step.point;
        }
    }
}

/// A diagram whose entries have the given (log density, log δ) pairs.
fn diagram_from_logs(pts: &[(f64, f64)]) -> ModeDiagram<f64> {
    let ps = PointSet::new((0..pts.len().max(2)).map(|i| i as f64).collect(), 1).unwrap();
    let mut p: Vec<(f64, f64)> = pts.to_vec();
    if p.len() < 2 {
        p.push((-9.0, 0.0));
    }
    let dens: Vec<f64> = p.iter().map(|&(ld, _)| ld.exp()).collect();
    let dt = compute_delta_bruteforce(&ps, &dens).unwrap();
    let mut dia = ModeDiagram::from_parts(&dens, dt, DiagramSource::Oracle).unwrap();
    dia.entries = p
        .iter()
        .enumerate()
        .map(|(index, &(ld, lt))| DiagramEntry {
            index,
            density: ld.exp(),
            delta: lt.exp(),
            log_density: ld,
            log_delta: lt,
        })
        .collect();
    dia
}
