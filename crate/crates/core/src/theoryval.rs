//! Monte-Carlo checks of the large-sample behavior of δ under a known density.
//!
//! For a non-critical point `x` of a smooth density `p`, `n · δ(x)^d` is
//! asymptotically exponential with rate `p(x) · τ · v_d`, where `v_d` is the
//! unit-ball volume and `τ = 1/2` is the limiting fraction of a small ball
//! lying in `{p > p(x)}`. At a mode the statistic diverges, and on the
//! log-log diagram non-modes line up with slope `-1/d`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::delta::compute_delta_indexed;
use crate::diagram::{DiagramSource, ModeDiagram};
use crate::error::{Error, Result};
use crate::points::{diameter, PointSet};
use crate::robustfit::{fit_line, FitOptions, RobustFit};
use crate::scalar::median_in_place;
use crate::synthgen::{
    generate, generate_with_rng, true_density, true_density_gradient, ShapeSpec,
};

/// Limit of the higher-density half-ball fraction at a non-critical point.
pub const DEFAULT_TAU: f64 = 0.5;

/// Top-density points dropped per true component before fitting a slope.
pub const SLOPE_EXCLUDE_PER_COMPONENT: usize = 3;

/// Volume of the unit ball in `R^d`, via `v_d = v_{d-2} · 2π / d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// Generator for replicate `rep`: one ChaCha stream per replicate.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitExperiment {
    pub spec: ShapeSpec,
    pub x: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub tau: f64,
}

impl LimitExperiment {
    pub fn new(spec: ShapeSpec, x: Vec<f64>, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            spec,
            x,
            n,
            reps,
            seed,
            tau: DEFAULT_TAU,
        }
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn unit_ball_volume(&self) -> f64 {
        unit_ball_volume(self.dim())
    }

    /// Rate `p(x) · τ · v_d` of the limiting exponential.
    pub fn limit_rate(&self) -> Result<f64> {
        Ok(true_density(&self.spec, &self.x)? * self.tau * self.unit_ball_volume())
    }
}

/// Scaled distances `n · δ(x)^d`, one per replicate that had any higher point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledDeltas {
    pub values: Vec<f64>,
    /// Replicates where no sample point had higher density than `x`.
    pub excluded: usize,
}

fn is_critical(spec: &ShapeSpec, x: &[f64]) -> Result<bool> {
    let p = true_density(spec, x)?;
    let g = true_density_gradient(spec, x)?;
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(norm <= 1e-8 * p)
}

fn replicate_sample(spec: &ShapeSpec, n: usize, seed: u64, rep: usize) -> Result<PointSet<f64>> {
    let spec = ShapeSpec { n, ..spec.clone() };
    let mut rng = replicate_rng(seed, rep as u64);
    Ok(generate_with_rng(&spec, &mut rng)?.points)
}

fn nearest_higher(spec: &ShapeSpec, ps: &PointSet<f64>, x: &[f64], px: f64) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for row in ps.rows() {
        if true_density(spec, row)? > px {
            let sq: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.is_none_or(|b| sq < b) {
                best = Some(sq);
            }
        }
    }
    Ok(best.map(f64::sqrt))
}

/// Draws `reps` samples of size `n` and records `n · δ(x)^d` for each, with δ
/// taken against the true density.
pub fn sample_scaled_delta(exp: &LimitExperiment) -> Result<ScaledDeltas> {
    if exp.n == 0 || exp.reps == 0 {
        return Err(Error::invalid("n and reps must be positive"));
    }
    if !(exp.tau > 0.0 && exp.tau < 1.0) {
        return Err(Error::invalid("tau must lie in (0, 1)"));
    }
    if is_critical(&exp.spec, &exp.x)? {
        return Err(Error::Precondition(format!(
            "test point {:?} is a critical point of the density",
            exp.x
        )));
    }
    let px = true_density(&exp.spec, &exp.x)?;
    let d = exp.dim() as i32;
    let n = exp.n as f64;
    let per_rep: Vec<Option<f64>> = (0..exp.reps)
        .into_par_iter()
        .map(|rep| {
            let ps = replicate_sample(&exp.spec, exp.n, exp.seed, rep)?;
            Ok(nearest_higher(&exp.spec, &ps, &exp.x, px)?.map(|delta| n * delta.powi(d)))
        })
        .collect::<Result<_>>()?;
    let excluded = per_rep.iter().filter(|v| v.is_none()).count();
    Ok(ScaledDeltas {
        values: per_rep.into_iter().flatten().collect(),
        excluded,
    })
}

/// `n · δ(x)^d` at an arbitrary point, including modes. When no sample point
/// is denser than `x`, δ falls back to the sample diameter.
pub fn mode_scaled_delta(
    spec: &ShapeSpec,
    x: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n < 2 || reps == 0 {
        return Err(Error::invalid("need n >= 2 and reps >= 1"));
    }
    let px = true_density(spec, x)?;
    let d = spec.dim() as i32;
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let ps = replicate_sample(spec, n, seed, rep)?;
            let delta = match nearest_higher(spec, &ps, x, px)? {
                Some(v) => v,
                None => diameter(&ps).value(),
            };
            Ok(n as f64 * delta.powi(d))
        })
        .collect()
}

/// Sup-distance between the empirical CDF of `samples` and `1 - exp(-rate·t)`.
pub fn ks_distance(samples: &[f64], rate: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("KS distance of an empty sample"));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid("rate must be positive"));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN in sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let m = sorted.len() as f64;
    let cdf = |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            1.0 - (-rate * t).exp()
        }
    };
    Ok(sorted.iter().enumerate().fold(0.0f64, |acc, (i, &t)| {
        let f = cdf(t);
        acc.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m)
    }))
}

/// Mode diagram computed from the true density instead of an estimate.
pub fn oracle_diagram(ps: &PointSet<f64>, spec: &ShapeSpec) -> Result<ModeDiagram<f64>> {
    let dens: Vec<f64> = ps
        .rows()
        .map(|r| true_density(spec, r))
        .collect::<Result<_>>()?;
    let dt = compute_delta_indexed(ps, &dens)?;
    ModeDiagram::from_parts(&dens, dt, DiagramSource::Oracle)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeCheck {
    pub slope: f64,
    pub fit: RobustFit<f64>,
    pub excluded: Vec<usize>,
}

/// Robust log-log slope of the oracle diagram with the densest few points of
/// each true component removed.
pub fn slope_check(spec: &ShapeSpec, n: usize, seed: u64) -> Result<SlopeCheck> {
    let spec = ShapeSpec {
        n,
        seed,
        ..spec.clone()
    };
    let ds = generate(&spec)?;
    let dia = oracle_diagram(&ds.points, &spec)?;
    let mut excluded = Vec::new();
    let mut components: Vec<i64> = ds.labels.iter().copied().filter(|&l| l >= 0).collect();
    components.sort_unstable();
    components.dedup();
    for c in components {
        let mut members: Vec<usize> = (0..ds.labels.len())
            .filter(|&i| ds.labels[i] == c)
            .collect();
        members.sort_by(|&a, &b| {
            dia.entries[b]
                .density
                .partial_cmp(&dia.entries[a].density)
                .expect("finite")
                .then(a.cmp(&b))
        });
        excluded.extend(members.into_iter().take(SLOPE_EXCLUDE_PER_COMPONENT));
    }
    excluded.sort_unstable();
    let kept = dia
        .entries
        .iter()
        .filter(|e| excluded.binary_search(&e.index).is_err());
    let (x, y): (Vec<f64>, Vec<f64>) = kept.map(|e| (e.log_density, e.log_delta)).unzip();
    let fit = fit_line(&x, &y, &FitOptions::default())?;
    Ok(SlopeCheck {
        slope: fit.beta1,
        fit,
        excluded,
    })
}

/// Accepted slope range for dimension `d` (target `-1/d`).
pub fn slope_band(d: usize) -> (f64, f64) {
    match d {
        1 => (-1.3, -0.7),
        2 => (-0.65, -0.35),
        3 => (-0.48, -0.19),
        _ => (-1.3 / d as f64, -0.7 / d as f64),
    }
}

/// Largest KS distance accepted for the exponential limit.
pub const KS_TOLERANCE: f64 = 0.10;
/// Largest relative error accepted for the sample mean of `n · δ^d`.
pub const MEAN_TOLERANCE: f64 = 0.10;
/// Below this many replicates the report carries a warning.
pub const MIN_RELIABLE_REPS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationConfig {
    /// Dimension of the standard normal under test.
    pub d: usize,
    pub point: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub tau: f64,
    pub slope_n: usize,
    pub mode_ns: Vec<usize>,
    pub mode_reps: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            d: 2,
            point: vec![1.0, 0.0],
            n: 5000,
            reps: 400,
            seed: 0,
            tau: DEFAULT_TAU,
            slope_n: 20000,
            mode_ns: vec![500, 2000, 8000],
            mode_reps: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationPass {
    pub ks: bool,
    pub mean: bool,
    pub slope: bool,
    pub mode_divergence: bool,
    pub all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub density_at_point: f64,
    pub rate: f64,
    pub expected_mean: f64,
    pub sample_mean: f64,
    pub ks_distance: f64,
    pub mean_ratio: f64,
    pub excluded: usize,
    pub slope: f64,
    pub slope_band: (f64, f64),
    pub mode_medians: Vec<f64>,
    pub pass: ValidationPass,
    pub warnings: Vec<String>,
}

/// Standard normal in `d` dimensions, written as a collapsed Gaussian pair.
pub fn standard_normal_spec(d: usize) -> ShapeSpec {
    ShapeSpec::gauss_pair(d, 2, 0.0)
}

/// Runs the exponential-limit, slope and mode-divergence checks on a
/// `d`-dimensional standard normal.
pub fn run_validation(cfg: &ValidationConfig) -> Result<ValidationReport> {
    if cfg.point.len() != cfg.d {
        return Err(Error::invalid(format!(
            "test point has {} coordinates, dimension is {}",
            cfg.point.len(),
            cfg.d
        )));
    }
    let spec = standard_normal_spec(cfg.d);
    let exp = LimitExperiment {
        tau: cfg.tau,
        ..LimitExperiment::new(spec.clone(), cfg.point.clone(), cfg.n, cfg.reps, cfg.seed)
    };
    let samples = sample_scaled_delta(&exp)?;
    let rate = exp.limit_rate()?;
    let expected_mean = 1.0 / rate;
    let mut warnings = Vec::new();
    if cfg.reps < MIN_RELIABLE_REPS {
        warnings.push(format!(
            "only {} replicates; at least {MIN_RELIABLE_REPS} are needed for a meaningful test",
            cfg.reps
        ));
    }
    if samples.excluded > 0 {
        warnings.push(format!(
            "{} replicates had no higher-density point",
            samples.excluded
        ));
    }
    let (ks, sample_mean) = if samples.values.is_empty() {
        (1.0, f64::NAN)
    } else {
        (
            ks_distance(&samples.values, rate)?,
            samples.values.iter().sum::<f64>() / samples.values.len() as f64,
        )
    };
    let mean_ratio = sample_mean / expected_mean;

    let slope = slope_check(&spec, cfg.slope_n, cfg.seed)?.slope;
    let band = slope_band(cfg.d);

    let mode = vec![0.0; cfg.d];
    let mode_medians: Vec<f64> = cfg
        .mode_ns
        .iter()
        .map(|&n| {
            let mut v = mode_scaled_delta(&spec, &mode, n, cfg.mode_reps, cfg.seed)?;
            Ok(median_in_place(&mut v).unwrap_or(f64::NAN))
        })
        .collect::<Result<_>>()?;

    let ks_ok = ks < KS_TOLERANCE && cfg.reps >= MIN_RELIABLE_REPS;
    let mean_ok = (mean_ratio - 1.0).abs() <= MEAN_TOLERANCE && cfg.reps >= MIN_RELIABLE_REPS;
    let slope_ok = slope >= band.0 && slope <= band.1;
    let divergence_ok = mode_medians.len() >= 2 && mode_medians.windows(2).all(|w| w[1] > w[0]);
    Ok(ValidationReport {
        config: cfg.clone(),
        density_at_point: true_density(&spec, &cfg.point)?,
        rate,
        expected_mean,
        sample_mean,
        ks_distance: ks,
        mean_ratio,
        excluded: samples.excluded,
        slope,
        slope_band: band,
        mode_medians,
        pass: ValidationPass {
            ks: ks_ok,
            mean: mean_ok,
            slope: slope_ok,
            mode_divergence: divergence_ok,
            all: ks_ok && mean_ok && slope_ok && divergence_ok,
        },
        warnings,
    })
}
