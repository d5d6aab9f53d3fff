use modediag::density::{auto_bandwidth, kde_self};
use modediag::diagram::{bootstrap_diagram, build_diagram, density_floor, trim_low_density};
use modediag::meanshift::{mean_shift_cluster, mean_shift_step, MeanShiftConfig};
use modediag::pipeline::{run, PipelineConfig};
use modediag::robustfit::{
    fit_line, fit_robust, least_squares, select_modes, FitOptions, RobustMethod, ThresholdFunction,
};
use modediag::synthgen::{generate, true_density, Shape, ShapeSpec, NOISE_LABEL};
use modediag::theoryval::{
    ks_distance, oracle_diagram, sample_scaled_delta, slope_band, slope_check,
    standard_normal_spec, LimitExperiment,
};
use modediag::{adjusted_rand_index, compute_delta_indexed, mode_diagnostic, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn two_blobs_1d(seed: u64) -> (PointSet<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::new();
    let mut truth = Vec::new();
    for (k, c) in [-6.0, 6.0].into_iter().enumerate() {
        for _ in 0..250 {
            let z: f64 = rng.sample(StandardNormal);
            coords.push(c + z);
            truth.push(k);
        }
    }
    (PointSet::new(coords, 1).unwrap(), truth)
}

#[test]
fn far_apart_1d_blobs_give_two_modes() {
    let (ps, truth) = two_blobs_1d(3);
    let out = run(&ps, &PipelineConfig::default()).unwrap();
    assert_eq!(out.modes.len(), 2);
    assert!(adjusted_rand_index(&out.clusters.labels, &truth).unwrap() >= 0.95);

    let inf = ThresholdFunction::new(out.threshold.fit, f64::INFINITY).unwrap();
    assert_eq!(
        select_modes(&out.diagram, &inf),
        vec![out.diagram.delta_table.root]
    );
}

#[test]
fn both_modes_pass_the_neighbor_diagnostic() {
    let data = generate(&ShapeSpec::gauss_pair(2, 600, 4.0).with_seed(8)).unwrap();
    let out = run(&data.points, &PipelineConfig::default()).unwrap();
    assert_eq!(out.modes.len(), 2);
    for &m in &out.modes {
        assert!(mode_diagnostic(&data.points, &out.density.values, m, 10).unwrap());
    }
    let top = out.diagram.delta_table.root;
    assert!(mode_diagnostic(&data.points, &out.density.values, top, 50).unwrap());
}

#[test]
fn bootstrap_diagram_keeps_two_modes() {
    let data = generate(&ShapeSpec::gauss_pair(2, 300, 3.0).with_seed(4)).unwrap();
    let plain = run(&data.points, &PipelineConfig::default()).unwrap();
    assert_eq!(plain.modes.len(), 2);
    let cfg = PipelineConfig {
        bootstrap: Some(4 * 300),
        seed: 11,
        ..PipelineConfig::default()
    };
    let boot = run(&data.points, &cfg).unwrap();
    assert_eq!(boot.modes.len(), 2);
    assert_eq!(boot.diagram.n_points(), 1200);
    assert!(adjusted_rand_index(&boot.clusters.labels, &plain.clusters.labels).unwrap() > 0.95);
    let again = run(&data.points, &cfg).unwrap();
    assert_eq!(again.clusters, boot.clusters);
    assert_eq!(again.diagram, boot.diagram);

    let bw = auto_bandwidth(&data.points, 1.0).unwrap();
    let a = bootstrap_diagram(&data.points, &bw, 500, 3).unwrap();
    assert_eq!(a, bootstrap_diagram(&data.points, &bw, 500, 3).unwrap());
    assert_ne!(
        a.sample,
        bootstrap_diagram(&data.points, &bw, 500, 4).unwrap().sample
    );
}

#[test]
fn oracle_and_estimated_agree_on_the_main_modes() {
    let spec = ShapeSpec::gauss_pair(2, 2000, 3.0).with_seed(21);
    let data = generate(&spec).unwrap();
    let est = run(&data.points, &PipelineConfig::default()).unwrap();
    let oracle = oracle_diagram(&data.points, &spec).unwrap();
    let fit = fit_robust(&oracle, RobustMethod::Huber, 100).unwrap();
    let oracle_modes = select_modes(&oracle, &ThresholdFunction::new(fit, 3.0).unwrap());

    let top_two = |modes: &[usize], dens: &dyn Fn(usize) -> f64| {
        let mut m = modes.to_vec();
        m.sort_by(|&a, &b| dens(b).partial_cmp(&dens(a)).unwrap());
        let mut comps: Vec<i64> = m.iter().take(2).map(|&i| data.labels[i]).collect();
        comps.sort_unstable();
        comps
    };
    let est_top = top_two(&est.modes, &|i| est.density.values[i]);
    let oracle_top = top_two(&oracle_modes, &|i| oracle.entries[i].density);
    assert_eq!(est_top, vec![0, 1]);
    assert_eq!(oracle_top, est_top);
}

#[test]
fn oracle_delta_depends_only_on_density_order() {
    let spec = ShapeSpec::gauss_pair(2, 400, 5.0).with_seed(2);
    let data = generate(&spec).unwrap();
    let oracle = oracle_diagram(&data.points, &spec).unwrap();
    // Any increasing transform of the true density induces the same ordering.
    let dens: Vec<f64> = data
        .points
        .rows()
        .map(|r| true_density(&spec, r).unwrap().sqrt())
        .collect();
    let dt = compute_delta_indexed(&data.points, &dens).unwrap();
    assert_eq!(dt.parent, oracle.delta_table.parent);
    assert_eq!(dt.delta, oracle.delta_table.delta);
    assert_eq!(
        oracle.delta_table.delta[oracle.delta_table.root],
        modediag::diameter(&data.points).value()
    );
}

#[test]
fn oracle_diagram_flags_each_component_peak() {
    let spec = ShapeSpec::gauss_pair(2, 1000, 5.0).with_seed(6);
    let data = generate(&spec).unwrap();
    let oracle = oracle_diagram(&data.points, &spec).unwrap();
    let fit = fit_robust(&oracle, RobustMethod::Huber, 100).unwrap();
    let tf = ThresholdFunction::new(fit, 3.0).unwrap();
    for c in 0..2 {
        let peak = (0..data.labels.len())
            .filter(|&i| data.labels[i] == c)
            .max_by(|&a, &b| {
                oracle.entries[a]
                    .density
                    .partial_cmp(&oracle.entries[b].density)
                    .unwrap()
            })
            .unwrap();
        let e = &oracle.entries[peak];
        assert!(peak == oracle.delta_table.root || tf.is_above_log(e.log_density, e.log_delta));
    }
}

#[test]
fn broken_circle_modes_are_the_largest_delta_high_density_points() {
    let data = generate(&ShapeSpec::new(Shape::BrokenCircle, 500).with_seed(5)).unwrap();
    let out = run(&data.points, &PipelineConfig::default()).unwrap();
    assert_eq!(out.modes.len(), 5);
    let mut dens = out.density.values.clone();
    dens.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = dens[dens.len() / 2];
    let mut high: Vec<_> = out
        .diagram
        .entries
        .iter()
        .filter(|e| e.density >= median)
        .collect();
    high.sort_by(|a, b| b.delta.partial_cmp(&a.delta).unwrap());
    let mut top5: Vec<usize> = high.iter().take(5).map(|e| e.index).collect();
    top5.sort_unstable();
    assert_eq!(top5, out.modes);
    let mut arcs: Vec<i64> = out.modes.iter().map(|&m| data.labels[m]).collect();
    arcs.sort_unstable();
    assert_eq!(arcs, vec![0, 1, 2, 3, 4]);
}

#[test]
fn crescent_noise_is_absorbed_into_the_crescents() {
    let data = generate(
        &ShapeSpec::new(Shape::FourCrescents, 400)
            .with_noise(200)
            .with_seed(1),
    )
    .unwrap();
    let out = run(&data.points, &PipelineConfig::default()).unwrap();
    assert_eq!(out.modes.len(), 4);
    assert_eq!(out.clusters.labels.len(), 600);
    let clean: Vec<usize> = (0..600)
        .filter(|&i| data.labels[i] != NOISE_LABEL)
        .collect();
    let got: Vec<usize> = clean.iter().map(|&i| out.clusters.labels[i]).collect();
    let truth: Vec<i64> = clean.iter().map(|&i| data.labels[i]).collect();
    assert!(adjusted_rand_index(&got, &truth).unwrap() > 0.95);
    let noise_labels: std::collections::HashSet<usize> =
        (400..600).map(|i| out.clusters.labels[i]).collect();
    assert!(noise_labels.len() > 1);
}

#[test]
fn mean_shift_on_separated_blobs() {
    let data = generate(&ShapeSpec::gauss_pair(2, 400, 3.0 / 2f64.sqrt()).with_seed(9)).unwrap();
    let bw = auto_bandwidth(&data.points, 1.0).unwrap();
    let cfg = MeanShiftConfig::new(&data.points, bw);
    let ms = mean_shift_cluster(&data.points, &cfg).unwrap();
    assert_eq!(ms.clusters.n_clusters(), 2);
    assert!(adjusted_rand_index(&ms.clusters.labels, &data.labels).unwrap() >= 0.95);
    let rl = run(&data.points, &PipelineConfig::default()).unwrap();
    assert!(adjusted_rand_index(&ms.clusters.labels, &rl.clusters.labels).unwrap() >= 0.95);
    for i in 0..data.points.len() {
        if ms.converged[i] {
            let e = ms.endpoints.row(i);
            let next = mean_shift_step(e, &data.points, &bw).unwrap().point;
            let moved: f64 = e
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(moved < cfg.step_tol * 10.0, "{moved}");
        }
    }
}

#[test]
fn huber_resists_planted_outliers() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 300;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..0.0)).collect();
    let mut y: Vec<f64> = x
        .iter()
        .map(|&v| 1.0 - 0.5 * v + 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let (_, clean_slope) = least_squares(&x, &y).unwrap();
    for k in 0..n / 10 {
        y[k * 10] += rng.random_range(5.0..15.0);
    }
    let fit = fit_line(&x, &y, &FitOptions::default()).unwrap();
    assert!(
        (fit.beta1 - clean_slope).abs() <= 0.05,
        "{} vs {}",
        fit.beta1,
        clean_slope
    );
}

#[test]
fn theil_sen_and_huber_agree_on_clean_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let x: Vec<f64> = (0..500).map(|_| rng.random_range(-4.0..1.0)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| 0.3 - 0.7 * v + 0.2 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let h = fit_line(&x, &y, &FitOptions::default()).unwrap();
    let t = fit_line(
        &x,
        &y,
        &FitOptions {
            method: RobustMethod::TheilSen,
            ..FitOptions::default()
        },
    )
    .unwrap();
    assert!((h.beta1 - t.beta1).abs() < 0.1);
    assert!(h.s > 0.0 && t.s > 0.0);
}

#[test]
fn slope_in_three_dimensions() {
    let check = slope_check(&ShapeSpec::gauss_pair(3, 20000, 0.0), 20000, 0).unwrap();
    let (lo, hi) = slope_band(3);
    assert!(check.slope >= lo && check.slope <= hi, "{}", check.slope);
    assert_eq!(check.excluded.len(), 6);
}

#[test]
fn exponential_limit_at_two_points() {
    for (x, seed) in [(vec![1.0, 0.0], 0), (vec![-0.5, 1.2], 1)] {
        let exp = LimitExperiment::new(standard_normal_spec(2), x, 5000, 400, seed);
        let v = sample_scaled_delta(&exp).unwrap();
        assert_eq!(v.excluded, 0);
        let ks = ks_distance(&v.values, exp.limit_rate().unwrap()).unwrap();
        assert!(ks < 0.10, "ks {ks}");
    }
}

#[test]
fn density_trim_is_idempotent() {
    let data = generate(
        &ShapeSpec::new(Shape::TwoBlobs, 100)
            .with_seed(1)
            .with_noise(20),
    )
    .unwrap();
    let bw = modediag::Bandwidth::fixed(0.2).unwrap();
    let dens = kde_self(&data.points, &bw).unwrap();
    let dt = compute_delta_indexed(&data.points, &dens.values).unwrap();
    let dia = build_diagram(&dens, dt).unwrap();
    let floor = density_floor(120, 2);
    let once = trim_low_density(dia, 120, 2);
    assert!(!once.trimmed.is_empty());
    assert!(once.trimmed.iter().all(|e| e.density < floor));
    assert!(once.entries.iter().all(|e| e.density >= floor));
    assert_eq!(trim_low_density(once.clone(), 120, 2), once);
}

#[test]
fn single_precision_pipeline() {
    let data = generate(&ShapeSpec::new(Shape::TwoBlobs, 400).with_seed(1)).unwrap();
    let ps32: PointSet<f32> = data.points.cast().unwrap();
    let out32 = run(&ps32, &PipelineConfig::default()).unwrap();
    let out64 = run(&data.points, &PipelineConfig::default()).unwrap();
    assert_eq!(out32.modes.len(), 2);
    assert!(adjusted_rand_index(&out32.clusters.labels, &out64.clusters.labels).unwrap() > 0.99);
}
