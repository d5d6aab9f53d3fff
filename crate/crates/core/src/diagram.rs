//! The mode diagram: per-point `(density, δ)` pairs and their log view.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::delta::{compute_delta_indexed_with, DeltaTable, RootDelta};
use crate::density::{kde_unchecked, Bandwidth, DensityEstimate};
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::scalar::Scalar;

/// Relative floor applied to δ before taking logs, as a fraction of `L`.
pub const DELTA_FLOOR_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagramSource {
    Estimated,
    Oracle,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramEntry<T: Scalar = f64> {
    pub index: usize,
    pub density: T,
    pub delta: T,
    pub log_density: T,
    pub log_delta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDiagram<T: Scalar = f64> {
    /// Entries used for fitting and mode selection, in index order.
    pub entries: Vec<DiagramEntry<T>>,
    pub source: DiagramSource,
    pub delta_table: DeltaTable<T>,
    /// Entries removed by the low-density floor, in index order.
    pub trimmed: Vec<DiagramEntry<T>>,
}

impl<T: Scalar> ModeDiagram<T> {
    /// Builds a diagram from any density values (estimated or true) and the
    /// δ table computed from them.
    pub fn from_parts(dens: &[T], dt: DeltaTable<T>, source: DiagramSource) -> Result<Self> {
        if dens.len() != dt.len() {
            return Err(Error::invalid(format!(
                "{} density values but δ table has {} entries",
                dens.len(),
                dt.len()
            )));
        }
        if let Some(i) = dens.iter().position(|v| !(*v > T::zero() && v.is_finite())) {
            return Err(Error::invalid(format!(
                "density at point {i} is {}; logs need positive values",
                dens[i]
            )));
        }
        let floor = dt.root_delta * T::of(DELTA_FLOOR_FRACTION);
        let entries = dens
            .iter()
            .zip(&dt.delta)
            .enumerate()
            .map(|(index, (&density, &delta))| DiagramEntry {
                index,
                density,
                delta,
                log_density: density.ln(),
                log_delta: delta.max(floor).ln(),
            })
            .collect();
        Ok(Self {
            entries,
            source,
            delta_table: dt,
            trimmed: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of points, trimmed or not.
    pub fn n_points(&self) -> usize {
        self.delta_table.len()
    }

    pub fn trimmed_indices(&self) -> Vec<usize> {
        self.trimmed.iter().map(|e| e.index).collect()
    }

    /// Every entry, trimmed or not, in index order.
    pub fn all_entries(&self) -> Vec<(DiagramEntry<T>, bool)> {
        let mut all: Vec<(DiagramEntry<T>, bool)> = self
            .entries
            .iter()
            .map(|e| (*e, false))
            .chain(self.trimmed.iter().map(|e| (*e, true)))
            .collect();
        all.sort_by_key(|(e, _)| e.index);
        all
    }
}

/// Estimated diagram from a density estimate and its δ table. Nothing is trimmed.
pub fn build_diagram<T: Scalar>(
    dens: &DensityEstimate<T>,
    dt: DeltaTable<T>,
) -> Result<ModeDiagram<T>> {
    ModeDiagram::from_parts(&dens.values, dt, DiagramSource::Estimated)
}

/// Density floor `n^(-1/(d+2))` below which points leave the diagram.
pub fn density_floor(n: usize, d: usize) -> f64 {
    (n as f64).powf(-1.0 / (d as f64 + 2.0))
}

/// Moves entries with density below `n^(-1/(d+2))` into `trimmed`.
pub fn trim_low_density<T: Scalar>(dia: ModeDiagram<T>, n: usize, d: usize) -> ModeDiagram<T> {
    let floor = T::of(density_floor(n, d));
    let ModeDiagram {
        entries,
        source,
        delta_table,
        mut trimmed,
    } = dia;
    let (keep, drop): (Vec<_>, Vec<_>) = entries.into_iter().partition(|e| e.density >= floor);
    trimmed.extend(drop);
    trimmed.sort_by_key(|e| e.index);
    ModeDiagram {
        entries: keep,
        source,
        delta_table,
        trimmed,
    }
}

/// A diagram built on a sample drawn from the kernel estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDiagram<T: Scalar = f64> {
    pub sample: PointSet<T>,
    pub diagram: ModeDiagram<T>,
}

/// Draws `size` points from the Gaussian kernel estimate (pick a row
/// uniformly, add `N(0, h² I)` noise), evaluates the original estimate at
/// them and builds the diagram on the new sample.
pub fn bootstrap_diagram<T: Scalar>(
    ps: &PointSet<T>,
    bw: &Bandwidth<T>,
    size: usize,
    seed: u64,
) -> Result<BootstrapDiagram<T>> {
    bootstrap_diagram_with(ps, bw, size, seed, RootDelta::Diameter)
}

pub fn bootstrap_diagram_with<T: Scalar>(
    ps: &PointSet<T>,
    bw: &Bandwidth<T>,
    size: usize,
    seed: u64,
    root: RootDelta<T>,
) -> Result<BootstrapDiagram<T>> {
    if size < 2 {
        return Err(Error::invalid("bootstrap sample size must be at least 2"));
    }
    if !(bw.h > T::zero() && bw.h.is_finite()) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    let d = ps.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(size * d);
    for _ in 0..size {
        let base = ps.row(rng.random_range(0..ps.len()));
        for &x in base {
            let z: f64 = rng.sample(StandardNormal);
            coords.push(x + bw.h * T::of(z));
        }
    }
    let sample = PointSet::new(coords, d)?;
    let dens: Vec<T> = (0..size)
        .into_par_iter()
        .map(|i| kde_unchecked(ps, bw.h, sample.row(i)))
        .collect();
    let dt = compute_delta_indexed_with(&sample, &dens, root)?;
    let diagram = ModeDiagram::from_parts(&dens, dt, DiagramSource::Bootstrap)?;
    Ok(BootstrapDiagram { sample, diagram })
}
