//! Gaussian mean shift, kept as a reference clustering to compare against.

use rayon::prelude::*;

use crate::clusterer::{ClusterMeta, ClusterResult};
use crate::density::{kde_unchecked, Bandwidth};
use crate::error::{Error, Result};
use crate::points::{diameter, PointSet};
use crate::scalar::{squared_distance, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanShiftConfig<T: Scalar = f64> {
    pub bandwidth: Bandwidth<T>,
    /// Iteration stops once a step moves less than this.
    pub step_tol: T,
    pub max_iter: usize,
    /// Endpoints closer than this are linked into the same mode.
    pub merge_radius: T,
}

impl<T: Scalar> MeanShiftConfig<T> {
    /// Defaults: `step_tol = 1e-7 · L`, 500 iterations, merge radius `h / 2`.
    pub fn new(ps: &PointSet<T>, bandwidth: Bandwidth<T>) -> Self {
        let l = diameter(ps).value();
        let step_tol = if l > T::zero() {
            T::of(1e-7) * l
        } else {
            T::of(1e-7) * bandwidth.h
        };
        Self {
            bandwidth,
            step_tol,
            max_iter: 500,
            merge_radius: bandwidth.h / T::of(2.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite() && v > T::zero();
        if ok(self.bandwidth.h) && ok(self.step_tol) && ok(self.merge_radius) && self.max_iter > 0 {
            Ok(())
        } else {
            Err(Error::invalid("mean-shift settings must all be positive"))
        }
    }
}

/// Outcome of one mean-shift update.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftStep<T: Scalar = f64> {
    pub point: Vec<T>,
    /// Every kernel weight underflowed; `point` is the unchanged input.
    pub stuck: bool,
}

/// Moves `x` to the Gaussian-weighted mean of the sample.
pub fn mean_shift_step<T: Scalar>(
    x: &[T],
    ps: &PointSet<T>,
    bw: &Bandwidth<T>,
) -> Result<ShiftStep<T>> {
    if x.len() != ps.dim() {
        return Err(Error::invalid("point dimension differs from data"));
    }
    if !(bw.h > T::zero()) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    Ok(shift(x, ps, bw.h))
}

fn shift<T: Scalar>(x: &[T], ps: &PointSet<T>, h: T) -> ShiftStep<T> {
    let inv_two_h2 = T::one() / (T::of(2.0) * h * h);
    let mut num = vec![T::zero(); x.len()];
    let mut den = T::zero();
    for row in ps.rows() {
        let w = (-squared_distance(x, row) * inv_two_h2).exp();
        den = den + w;
        for (acc, &c) in num.iter_mut().zip(row) {
            *acc = *acc + w * c;
        }
    }
    if !(den > T::zero()) {
        return ShiftStep {
            point: x.to_vec(),
            stuck: true,
        };
    }
    ShiftStep {
        point: num.into_iter().map(|v| v / den).collect(),
        stuck: false,
    }
}

/// Mean-shift clustering plus the per-point trajectories' end states.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanShiftClustering<T: Scalar = f64> {
    pub clusters: ClusterResult<T>,
    pub endpoints: PointSet<T>,
    pub converged: Vec<bool>,
}

struct Trajectory<T> {
    end: Vec<T>,
    converged: bool,
}

fn climb<T: Scalar>(start: &[T], ps: &PointSet<T>, cfg: &MeanShiftConfig<T>) -> Trajectory<T> {
    let tol_sq = cfg.step_tol * cfg.step_tol;
    let mut x = start.to_vec();
    for _ in 0..cfg.max_iter {
        let step = shift(&x, ps, cfg.bandwidth.h);
        if step.stuck {
            return Trajectory {
                end: x,
                converged: false,
            };
        }
        let moved = squared_distance(&x, &step.point);
        x = step.point;
        if moved < tol_sq {
            return Trajectory {
                end: x,
                converged: true,
            };
        }
    }
    Trajectory {
        end: x,
        converged: false,
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Runs mean shift from every sample point, links converged endpoints within
/// the merge radius (single linkage) and labels points by their endpoint's group.
///
/// Clusters are numbered by decreasing density at their best endpoint. Points
/// that hit `max_iter` join the group of the nearest converged endpoint.
pub fn mean_shift_cluster<T: Scalar>(
    ps: &PointSet<T>,
    cfg: &MeanShiftConfig<T>,
) -> Result<MeanShiftClustering<T>> {
    cfg.validate()?;
    let n = ps.len();
    if n < 2 {
        return Err(Error::degenerate("mean shift needs at least 2 points"));
    }
    let trajectories: Vec<Trajectory<T>> = (0..n)
        .into_par_iter()
        .map(|i| climb(ps.row(i), ps, cfg))
        .collect();
    let converged: Vec<bool> = trajectories.iter().map(|t| t.converged).collect();
    let endpoints = PointSet::new(
        trajectories.into_iter().flat_map(|t| t.end).collect(),
        ps.dim(),
    )?;

    let anchors: Vec<usize> = if converged.iter().any(|&c| c) {
        (0..n).filter(|&i| converged[i]).collect()
    } else {
        (0..n).collect()
    };

    let radius_sq = cfg.merge_radius * cfg.merge_radius;
    let mut parent: Vec<usize> = (0..n).collect();
    for (a, &i) in anchors.iter().enumerate() {
        for &j in &anchors[a + 1..] {
            if squared_distance(endpoints.row(i), endpoints.row(j)) <= radius_sq {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let h = cfg.bandwidth.h;
    let end_density: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| kde_unchecked(ps, h, endpoints.row(i)))
        .collect();

    // Best endpoint per group: highest density, then smallest index.
    let mut best: Vec<Option<usize>> = vec![None; n];
    for &i in &anchors {
        let g = find(&mut parent, i);
        best[g] = match best[g] {
            Some(b) if end_density[b] >= end_density[i] => Some(b),
            _ => Some(i),
        };
    }
    let mut groups: Vec<(usize, usize)> = best
        .iter()
        .enumerate()
        .filter_map(|(g, b)| b.map(|b| (g, b)))
        .collect();
    groups.sort_by(|a, b| {
        end_density[b.1]
            .partial_cmp(&end_density[a.1])
            .expect("finite density")
            .then(a.1.cmp(&b.1))
    });
    let mut group_label = vec![usize::MAX; n];
    for (label, &(g, _)) in groups.iter().enumerate() {
        group_label[g] = label;
    }
    let modes: Vec<usize> = groups.iter().map(|&(_, b)| b).collect();

    let is_anchor = {
        let mut v = vec![false; n];
        for &i in &anchors {
            v[i] = true;
        }
        v
    };
    let mut labels = vec![0usize; n];
    for i in 0..n {
        let source = if is_anchor[i] {
            i
        } else {
            let e = endpoints.row(i);
            let mut nearest = anchors[0];
            let mut nearest_sq = squared_distance(e, endpoints.row(nearest));
            for &j in &anchors[1..] {
                let sq = squared_distance(e, endpoints.row(j));
                if sq < nearest_sq {
                    nearest = j;
                    nearest_sq = sq;
                }
            }
            nearest
        };
        labels[i] = group_label[find(&mut parent, source)];
    }

    Ok(MeanShiftClustering {
        clusters: ClusterResult {
            labels,
            modes,
            meta: ClusterMeta {
                bandwidth: Some(h),
                ..ClusterMeta::default()
            },
        },
        endpoints,
        converged,
    })
}
