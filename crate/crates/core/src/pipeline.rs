//! End-to-end clustering: density → δ → diagram → robust threshold → labels.

use std::time::Instant;

use crate::clusterer::{assign_from_diagram, ClusterMeta, ClusterResult};
use crate::delta::{compute_delta_indexed_with, RootDelta};
use crate::density::{auto_bandwidth, kde_self, Bandwidth, DensityEstimate};
use crate::diagram::{
    bootstrap_diagram_with, build_diagram, density_floor, trim_low_density, ModeDiagram,
};
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::robustfit::{fit_robust_with, select_modes, FitOptions, ThresholdFunction, DEFAULT_M};
use crate::scalar::{squared_distance, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthChoice {
    Auto { c0: f64 },
    Fixed(f64),
}

impl Default for BandwidthChoice {
    fn default() -> Self {
        BandwidthChoice::Auto { c0: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub bandwidth: BandwidthChoice,
    pub m: f64,
    pub fit: FitOptions,
    /// Drop points below the `n^(-1/(d+2))` density floor from the diagram.
    pub density_floor: bool,
    /// Root δ; the data diameter when `None`.
    pub root_delta: Option<f64>,
    /// Build the diagram on a smoothed-bootstrap sample of this size.
    pub bootstrap: Option<usize>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bandwidth: BandwidthChoice::default(),
            m: DEFAULT_M,
            fit: FitOptions::default(),
            density_floor: false,
            root_delta: None,
            bootstrap: None,
            seed: 0,
        }
    }
}

/// Clustering of the bootstrap sample itself.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapRun<T: Scalar = f64> {
    pub sample: PointSet<T>,
    pub clusters: ClusterResult<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput<T: Scalar = f64> {
    pub density: DensityEstimate<T>,
    /// The diagram the threshold was fitted on (bootstrap sample when enabled).
    pub diagram: ModeDiagram<T>,
    pub threshold: ThresholdFunction<T>,
    /// Indices into the diagram's points.
    pub modes: Vec<usize>,
    /// Labels for the input points.
    pub clusters: ClusterResult<T>,
    pub bootstrap: Option<BootstrapRun<T>>,
    /// Wall-clock milliseconds per stage, in execution order.
    pub timings: Vec<(&'static str, f64)>,
}

struct Stopwatch {
    laps: Vec<(&'static str, f64)>,
}

impl Stopwatch {
    fn run<R>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<R>) -> Result<R> {
        let start = Instant::now();
        let out = f().map_err(|e| e.at_stage(stage))?;
        self.laps.push((stage, start.elapsed().as_secs_f64() * 1e3));
        Ok(out)
    }
}

pub fn run<T: Scalar>(ps: &PointSet<T>, cfg: &PipelineConfig) -> Result<PipelineOutput<T>> {
    if ps.len() < 2 {
        return Err(Error::degenerate("need at least 2 points").at_stage("input"));
    }
    let mut sw = Stopwatch { laps: Vec::new() };
    let bw = sw.run("bandwidth", || match cfg.bandwidth {
        BandwidthChoice::Auto { c0 } => auto_bandwidth(ps, T::of(c0)),
        BandwidthChoice::Fixed(h) => Bandwidth::fixed(T::of(h)),
    })?;
    let root = match cfg.root_delta {
        Some(l) => RootDelta::Fixed(T::of(l)),
        None => RootDelta::Diameter,
    };
    let density = sw.run("density", || kde_self(ps, &bw))?;

    let (diagram, sample) = match cfg.bootstrap {
        None => {
            let dt = sw.run("delta", || {
                compute_delta_indexed_with(ps, &density.values, root)
            })?;
            let dia = sw.run("diagram", || build_diagram(&density, dt))?;
            (dia, None)
        }
        Some(size) => {
            let boot = sw.run("bootstrap", || {
                bootstrap_diagram_with(ps, &bw, size, cfg.seed, root)
            })?;
            (boot.diagram, Some(boot.sample))
        }
    };
    let diagram = if cfg.density_floor {
        let n = diagram.n_points();
        let trimmed = trim_low_density(diagram, n, ps.dim());
        if trimmed.entries.len() < 3 {
            return Err(Error::Fit(format!(
                "density floor {:.4} leaves {} of {} points, the fit needs at least 3",
                density_floor(n, ps.dim()),
                trimmed.entries.len(),
                n
            ))
            .at_stage("fit"));
        }
        trimmed
    } else {
        diagram
    };

    let fit = sw.run("fit", || fit_robust_with(&diagram, &cfg.fit))?;
    let threshold = ThresholdFunction::new(fit, T::of(cfg.m)).map_err(|e| e.at_stage("fit"))?;
    let modes = sw.run("select", || Ok(select_modes(&diagram, &threshold)))?;
    let meta = ClusterMeta {
        bandwidth: Some(bw.h),
        m: Some(T::of(cfg.m)),
        method: Some(cfg.fit.method),
        seed: Some(cfg.seed),
        root_delta: Some(diagram.delta_table.root_delta),
    };
    let assigned = sw
        .run("assign", || assign_from_diagram(&diagram, &modes))?
        .with_meta(meta.clone());

    let (clusters, bootstrap) = match sample {
        None => (assigned, None),
        Some(sample) => {
            let mapped = sw
                .run("map", || {
                    map_to_bootstrap(ps, &density.values, &sample, &diagram, &assigned)
                })?
                .with_meta(meta);
            (
                mapped,
                Some(BootstrapRun {
                    sample,
                    clusters: assigned,
                }),
            )
        }
    };

    Ok(PipelineOutput {
        density,
        diagram,
        threshold,
        modes,
        clusters,
        bootstrap,
        timings: sw.laps,
    })
}

/// Labels each input point with the cluster of its nearest bootstrap point
/// of higher estimated density (nearest bootstrap mode if none is higher),
/// then renumbers clusters that received input points.
fn map_to_bootstrap<T: Scalar>(
    ps: &PointSet<T>,
    dens: &[T],
    sample: &PointSet<T>,
    dia: &ModeDiagram<T>,
    boot: &ClusterResult<T>,
) -> Result<ClusterResult<T>> {
    let boot_dens: Vec<T> = {
        let mut v = vec![T::zero(); dia.n_points()];
        for (e, _) in dia.all_entries() {
            v[e.index] = e.density;
        }
        v
    };
    let nearest_among = |x: &[T], pred: &dyn Fn(usize) -> bool| -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for j in 0..sample.len() {
            if !pred(j) {
                continue;
            }
            let sq = squared_distance(x, sample.row(j));
            if best.is_none_or(|(_, b)| sq < b) {
                best = Some((j, sq));
            }
        }
        best.map(|(j, _)| j)
    };
    let mut raw = Vec::with_capacity(ps.len());
    for (x, &di) in ps.rows().zip(dens) {
        let j = nearest_among(x, &|j| boot_dens[j] > di)
            .or_else(|| nearest_among(x, &|j| boot.modes.contains(&j)))
            .ok_or_else(|| Error::degenerate("bootstrap produced no modes"))?;
        raw.push(boot.labels[j]);
    }
    let mut remap = vec![usize::MAX; boot.modes.len()];
    let mut next = 0;
    for (old, slot) in remap.iter_mut().enumerate() {
        if raw.contains(&old) {
            *slot = next;
            next += 1;
        }
    }
    let labels: Vec<usize> = raw.iter().map(|&l| remap[l]).collect();
    let mut modes = vec![usize::MAX; next];
    for (i, &l) in labels.iter().enumerate() {
        if modes[l] == usize::MAX || dens[i] > dens[modes[l]] {
            modes[l] = i;
        }
    }
    Ok(ClusterResult {
        labels,
        modes,
        meta: ClusterMeta::default(),
    })
}
