//! Gaussian kernel density estimation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::scalar::{squared_distance, Scalar};

/// How a bandwidth was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum BandwidthRule {
    /// `h = c0 · σ̂ · n^(-1/(d+6))`, σ̂ the mean marginal standard deviation.
    AutoRate {
        c0: f64,
    },
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth<T: Scalar = f64> {
    pub h: T,
    pub rule: BandwidthRule,
}

impl<T: Scalar> Bandwidth<T> {
    pub fn fixed(h: T) -> Result<Self> {
        if !(h.is_finite() && h > T::zero()) {
            return Err(Error::invalid(format!(
                "bandwidth must be positive and finite, got {h}"
            )));
        }
        Ok(Self {
            h,
            rule: BandwidthRule::Fixed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Gaussian,
}

/// Density values at the sample points together with how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate<T: Scalar = f64> {
    pub values: Vec<T>,
    pub bandwidth: Bandwidth<T>,
    pub kernel: Kernel,
}

impl<T: Scalar> AsRef<[T]> for DensityEstimate<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

/// Bandwidth shrinking at the rate `n^(-1/(d+6))`, scaled by the data spread.
pub fn auto_bandwidth<T: Scalar>(ps: &PointSet<T>, c0: T) -> Result<Bandwidth<T>> {
    if !(c0.is_finite() && c0 > T::zero()) {
        return Err(Error::invalid(format!("c0 must be positive, got {c0}")));
    }
    let n = ps.len();
    if n < 2 {
        return Err(Error::degenerate(
            "automatic bandwidth needs at least 2 points",
        ));
    }
    let d = ps.dim();
    let stds = ps.marginal_std();
    let sigma = stds.iter().copied().sum::<T>() / T::from_count(d);
    if !(sigma > T::zero()) {
        return Err(Error::degenerate("all points coincide; spread is zero"));
    }
    let exponent = -T::one() / T::from_count(d + 6);
    let h = c0 * sigma * T::from_count(n).powf(exponent);
    Ok(Bandwidth {
        h,
        rule: BandwidthRule::AutoRate { c0: c0.as_f64() },
    })
}

/// Normalizing factor `1 / (n h^d (2π)^{d/2})`.
fn normalizer<T: Scalar>(n: usize, d: usize, h: T) -> T {
    let two_pi = T::of(2.0 * std::f64::consts::PI);
    let dd = T::from_count(d);
    T::one() / (T::from_count(n) * h.powi(d as i32) * two_pi.powf(dd / T::of(2.0)))
}

fn check_bandwidth<T: Scalar>(bw: &Bandwidth<T>) -> Result<()> {
    if bw.h.is_finite() && bw.h > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "bandwidth must be positive, got {}",
            bw.h
        )))
    }
}

#[inline]
fn kernel_sum<T: Scalar>(ps: &PointSet<T>, query: &[T], inv_two_h2: T) -> T {
    ps.rows()
        .map(|x| (-squared_distance(query, x) * inv_two_h2).exp())
        .fold(T::zero(), |acc, w| acc + w)
}

/// Kernel density estimate at an arbitrary query point.
///
/// Far from all samples the Gaussian weights can underflow, in which case the
/// result is zero.
pub fn kde_at<T: Scalar>(ps: &PointSet<T>, bw: &Bandwidth<T>, query: &[T]) -> Result<T> {
    check_bandwidth(bw)?;
    if query.len() != ps.dim() {
        return Err(Error::invalid(format!(
            "query has dimension {}, data has {}",
            query.len(),
            ps.dim()
        )));
    }
    if query.iter().any(|q| !q.is_finite()) {
        return Err(Error::invalid("query point has a non-finite coordinate"));
    }
    Ok(kde_unchecked(ps, bw.h, query))
}

pub(crate) fn kde_unchecked<T: Scalar>(ps: &PointSet<T>, h: T, query: &[T]) -> T {
    let inv_two_h2 = T::one() / (T::of(2.0) * h * h);
    normalizer(ps.len(), ps.dim(), h) * kernel_sum(ps, query, inv_two_h2)
}

/// Density estimate at every sample point.
///
/// Evaluation is spread over the rayon pool; each value is computed by the
/// same sequential sum as [`kde_at`], so results do not depend on the number
/// of workers.
pub fn kde_self<T: Scalar>(ps: &PointSet<T>, bw: &Bandwidth<T>) -> Result<DensityEstimate<T>> {
    check_bandwidth(bw)?;
    let h = bw.h;
    let values: Vec<T> = (0..ps.len())
        .into_par_iter()
        .map(|i| kde_unchecked(ps, h, ps.row(i)))
        .collect();
    Ok(DensityEstimate {
        values,
        bandwidth: *bw,
        kernel: Kernel::Gaussian,
    })
}
