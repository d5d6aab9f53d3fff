//! Robust regression of `ln δ` on `ln density` and the threshold it induces.
//!
//! Points whose log-δ sits more than `M·s` above the fitted line are
//! declared modes; equivalently `δ > t(u) = exp(β₀ + M·s) · u^β₁`.

use serde::Serialize;

use crate::diagram::ModeDiagram;
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::scalar::{median_in_place, squared_distance, Scalar};

/// Consistency factor turning a median absolute deviation into a Gaussian σ.
pub const MAD_TO_SIGMA: f64 = 1.4826;
pub const HUBER_TUNING: f64 = 1.345;
pub const DEFAULT_M: f64 = 3.0;
pub const DEFAULT_MAX_ITER: usize = 100;
/// Theil-Sen materializes every pairwise slope.
pub const THEIL_SEN_MAX_POINTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RobustMethod {
    #[default]
    Huber,
    TheilSen,
}

/// How the residual scale `s` is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleEstimator {
    /// `1.4826 · MAD` of the residuals.
    #[default]
    Mad,
    /// Classical residual standard deviation, `sqrt(Σ r² / (m - 2))`.
    Classic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub method: RobustMethod,
    pub scale: ScaleEstimator,
    pub max_iter: usize,
    pub tuning: f64,
    /// Convergence threshold on the largest coefficient change.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            method: RobustMethod::Huber,
            scale: ScaleEstimator::Mad,
            max_iter: DEFAULT_MAX_ITER,
            tuning: HUBER_TUNING,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustFit<T: Scalar = f64> {
    pub beta0: T,
    pub beta1: T,
    pub s: T,
    pub method: RobustMethod,
    pub scale: ScaleEstimator,
    pub iterations: usize,
    pub n_used: usize,
}

impl<T: Scalar> RobustFit<T> {
    #[inline]
    pub fn predict(&self, x: T) -> T {
        self.beta0 + self.beta1 * x
    }

    #[inline]
    pub fn residual(&self, x: T, y: T) -> T {
        y - self.predict(x)
    }
}

/// Fits the diagram's non-trimmed entries with the default (MAD) scale.
pub fn fit_robust<T: Scalar>(
    dia: &ModeDiagram<T>,
    method: RobustMethod,
    max_iter: usize,
) -> Result<RobustFit<T>> {
    fit_robust_with(
        dia,
        &FitOptions {
            method,
            max_iter,
            ..FitOptions::default()
        },
    )
}

pub fn fit_robust_with<T: Scalar>(dia: &ModeDiagram<T>, opts: &FitOptions) -> Result<RobustFit<T>> {
    let x: Vec<T> = dia.entries.iter().map(|e| e.log_density).collect();
    let y: Vec<T> = dia.entries.iter().map(|e| e.log_delta).collect();
    fit_line(&x, &y, opts)
}

/// Robust straight-line fit of `y` on `x`.
pub fn fit_line<T: Scalar>(x: &[T], y: &[T], opts: &FitOptions) -> Result<RobustFit<T>> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!(
            "{} predictors but {} responses",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite value in regression data".into()));
    }
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Err(Error::Fit("predictor has zero variance".into()));
    }
    let (beta0, beta1, iterations) = match opts.method {
        RobustMethod::Huber => huber_irls(x, y, opts)?,
        RobustMethod::TheilSen => theil_sen(x, y)?,
    };
    let residuals: Vec<T> = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| yi - (beta0 + beta1 * xi))
        .collect();
    let s = match (opts.scale, opts.method) {
        (ScaleEstimator::Classic, _) => classic_scale(&residuals),
        (ScaleEstimator::Mad, RobustMethod::Huber) => mad_about_zero(&residuals),
        (ScaleEstimator::Mad, RobustMethod::TheilSen) => mad_about_median(&residuals),
    };
    Ok(RobustFit {
        beta0,
        beta1,
        s,
        method: opts.method,
        scale: opts.scale,
        iterations,
        n_used: x.len(),
    })
}

fn mad_about_zero<T: Scalar>(r: &[T]) -> T {
    let mut abs: Vec<T> = r.iter().map(|v| v.abs()).collect();
    T::of(MAD_TO_SIGMA) * median_in_place(&mut abs).unwrap_or_else(T::zero)
}

fn mad_about_median<T: Scalar>(r: &[T]) -> T {
    let mut tmp = r.to_vec();
    let med = median_in_place(&mut tmp).unwrap_or_else(T::zero);
    let mut abs: Vec<T> = r.iter().map(|v| (*v - med).abs()).collect();
    T::of(MAD_TO_SIGMA) * median_in_place(&mut abs).unwrap_or_else(T::zero)
}

fn classic_scale<T: Scalar>(r: &[T]) -> T {
    let ss: T = r.iter().map(|v| *v * *v).sum();
    (ss / T::from_count(r.len() - 2)).sqrt()
}

/// Weighted least squares on centered data; returns `(intercept, slope)`.
pub(crate) fn weighted_least_squares<T: Scalar>(x: &[T], y: &[T], w: &[T]) -> Result<(T, T)> {
    let sw: T = w.iter().copied().sum();
    if !(sw > T::zero()) {
        return Err(Error::Fit("all regression weights are zero".into()));
    }
    let mx = x.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / sw;
    let my = y.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / sw;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        let dx = xi - mx;
        sxx = sxx + wi * dx * dx;
        sxy = sxy + wi * dx * (yi - my);
    }
    if !(sxx > T::zero()) {
        return Err(Error::Fit("weighted predictor has zero variance".into()));
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// Ordinary least squares line `(intercept, slope)`.
pub fn least_squares<T: Scalar>(x: &[T], y: &[T]) -> Result<(T, T)> {
    weighted_least_squares(x, y, &vec![T::one(); x.len()])
}

fn huber_irls<T: Scalar>(x: &[T], y: &[T], opts: &FitOptions) -> Result<(T, T, usize)> {
    let (mut b0, mut b1) = least_squares(x, y)?;
    let c = T::of(opts.tuning);
    let tol = T::of(opts.tol);
    let mut residuals = vec![T::zero(); x.len()];
    let mut weights = vec![T::one(); x.len()];
    for iter in 1..=opts.max_iter {
        for ((r, &xi), &yi) in residuals.iter_mut().zip(x).zip(y) {
            *r = yi - (b0 + b1 * xi);
        }
        let s = mad_about_zero(&residuals);
        if !(s > T::zero()) {
            // More than half the points already lie exactly on the line.
            return Ok((b0, b1, iter - 1));
        }
        let cut = c * s;
        for (w, r) in weights.iter_mut().zip(&residuals) {
            let a = r.abs();
            *w = if a <= cut { T::one() } else { cut / a };
        }
        let (n0, n1) = weighted_least_squares(x, y, &weights)?;
        let change = (n0 - b0).abs().max((n1 - b1).abs());
        b0 = n0;
        b1 = n1;
        if change < tol {
            return Ok((b0, b1, iter));
        }
    }
    Ok((b0, b1, opts.max_iter))
}

fn theil_sen<T: Scalar>(x: &[T], y: &[T]) -> Result<(T, T, usize)> {
    let n = x.len();
    if n > THEIL_SEN_MAX_POINTS {
        return Err(Error::Fit(format!(
            "theil-sen is limited to {THEIL_SEN_MAX_POINTS} points, got {n}; use huber"
        )));
    }
    let mut slopes = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[j] - x[i];
            if dx != T::zero() {
                slopes.push((y[j] - y[i]) / dx);
            }
        }
    }
    let slope = median_in_place(&mut slopes)
        .ok_or_else(|| Error::Fit("no pairs with distinct predictors".into()))?;
    let mut offsets: Vec<T> = x.iter().zip(y).map(|(&xi, &yi)| yi - slope * xi).collect();
    let intercept = median_in_place(&mut offsets).expect("non-empty");
    Ok((intercept, slope, 1))
}

/// `t(u) = exp(β₀ + M·s) · u^β₁` together with the outlier rule it encodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdFunction<T: Scalar = f64> {
    pub fit: RobustFit<T>,
    pub m: T,
}

impl<T: Scalar> ThresholdFunction<T> {
    pub fn new(fit: RobustFit<T>, m: T) -> Result<Self> {
        if !(m.is_finite() && m > T::zero()) && m != T::infinity() {
            return Err(Error::invalid(format!("M must be positive, got {m}")));
        }
        Ok(Self { fit, m })
    }

    /// Log-domain cutoff `M·s` on residuals. Infinite `M` with `s = 0` yields `+∞`.
    pub fn residual_cutoff(&self) -> T {
        if self.fit.s == T::zero() {
            if self.m.is_infinite() {
                T::infinity()
            } else {
                T::zero()
            }
        } else {
            self.m * self.fit.s
        }
    }

    /// True when a diagram point with the given logs lies above the threshold.
    #[inline]
    pub fn is_above_log(&self, log_density: T, log_delta: T) -> bool {
        self.fit.residual(log_density, log_delta) > self.residual_cutoff()
    }
}

/// Evaluates the threshold function at density `u > 0`.
pub fn threshold_value<T: Scalar>(tf: &ThresholdFunction<T>, u: T) -> Result<T> {
    if !(u > T::zero()) {
        return Err(Error::invalid(format!(
            "threshold argument must be positive, got {u}"
        )));
    }
    Ok((tf.fit.beta0 + tf.residual_cutoff()).exp() * u.powf(tf.fit.beta1))
}

/// Indices of entries above the threshold, plus the δ-table root, ascending.
pub fn select_modes<T: Scalar>(dia: &ModeDiagram<T>, tf: &ThresholdFunction<T>) -> Vec<usize> {
    let root = dia.delta_table.root;
    let mut modes: Vec<usize> = dia
        .entries
        .iter()
        .filter(|e| e.index == root || tf.is_above_log(e.log_density, e.log_delta))
        .map(|e| e.index)
        .collect();
    if !modes.contains(&root) && dia.entries.iter().any(|e| e.index == root) {
        modes.push(root);
    }
    modes.sort_unstable();
    modes
}

/// Residuals `ln δ − (β₀ + β₁ ln density)` of the non-trimmed entries, as `(index, residual)`.
pub fn residuals<T: Scalar>(dia: &ModeDiagram<T>, fit: &RobustFit<T>) -> Vec<(usize, T)> {
    dia.entries
        .iter()
        .map(|e| (e.index, fit.residual(e.log_density, e.log_delta)))
        .collect()
}

/// Checks that a claimed mode has higher density than each of its `k`
/// nearest neighbors. Advisory only.
pub fn mode_diagnostic<T: Scalar>(
    ps: &PointSet<T>,
    dens: &[T],
    mode: usize,
    k: usize,
) -> Result<bool> {
    ps.check_index(mode)?;
    if dens.len() != ps.len() {
        return Err(Error::invalid("density length differs from point count"));
    }
    if k == 0 || k >= ps.len() {
        return Err(Error::invalid(format!(
            "neighbor count must be in 1..{}, got {k}",
            ps.len()
        )));
    }
    let xm = ps.row(mode);
    let mut neighbors: Vec<(T, usize)> = (0..ps.len())
        .filter(|&j| j != mode)
        .map(|j| (squared_distance(xm, ps.row(j)), j))
        .collect();
    neighbors.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));
    Ok(neighbors[..k].iter().all(|&(_, j)| dens[mode] > dens[j]))
}

/// Serializable summary of a fit and the modes it selected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub method: RobustMethod,
    pub scale: ScaleEstimator,
    pub beta0: f64,
    pub beta1: f64,
    pub s: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub iterations: usize,
    pub n_used: usize,
    pub n_trimmed: usize,
    pub mode_indices: Vec<usize>,
}

impl FitReport {
    pub fn new<T: Scalar>(tf: &ThresholdFunction<T>, n_trimmed: usize, modes: &[usize]) -> Self {
        Self {
            method: tf.fit.method,
            scale: tf.fit.scale,
            beta0: tf.fit.beta0.as_f64(),
            beta1: tf.fit.beta1.as_f64(),
            s: tf.fit.s.as_f64(),
            m: tf.m.as_f64(),
            iterations: tf.fit.iterations,
            n_used: tf.fit.n_used,
            n_trimmed,
            mode_indices: modes.to_vec(),
        }
    }
}
