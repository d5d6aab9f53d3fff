//! Cluster assignment by following nearest-higher-density links to a mode.

use std::collections::HashMap;
use std::hash::Hash;

use crate::delta::DeltaTable;
use crate::diagram::ModeDiagram;
use crate::error::{Error, Result};
use crate::robustfit::RobustMethod;
use crate::scalar::Scalar;

/// Provenance attached to a clustering.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterMeta<T: Scalar = f64> {
    pub bandwidth: Option<T>,
    pub m: Option<T>,
    pub method: Option<RobustMethod>,
    pub seed: Option<u64>,
    pub root_delta: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult<T: Scalar = f64> {
    /// Cluster id per point, in `0..modes.len()`.
    pub labels: Vec<usize>,
    /// `modes[j]` is the point that founded cluster `j`.
    pub modes: Vec<usize>,
    pub meta: ClusterMeta<T>,
}

impl<T: Scalar> ClusterResult<T> {
    pub fn n_clusters(&self) -> usize {
        self.modes.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.modes.len()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn is_mode(&self) -> Vec<bool> {
        let mut flags = vec![false; self.labels.len()];
        for &m in &self.modes {
            flags[m] = true;
        }
        flags
    }

    pub fn with_meta(mut self, meta: ClusterMeta<T>) -> Self {
        self.meta = meta;
        self
    }
}

/// Labels every point with the first selected mode reached along its parent
/// chain.
///
/// Points are swept from highest to lowest density. A parent always ranks
/// above its child, so by the time a point is visited its parent already
/// carries a label. Cluster ids are handed out in the order modes are met,
/// which makes the root cluster 0.
pub fn assign_clusters<T: Scalar>(dt: &DeltaTable<T>, modes: &[usize]) -> Result<ClusterResult<T>> {
    let n = dt.len();
    if modes.is_empty() {
        return Err(Error::invalid("mode set is empty"));
    }
    let mut is_mode = vec![false; n];
    for &m in modes {
        if m >= n {
            return Err(Error::IndexOutOfRange { index: m, len: n });
        }
        is_mode[m] = true;
    }
    if !is_mode[dt.root] {
        return Err(Error::invalid(format!(
            "mode set must contain the density maximum (point {})",
            dt.root
        )));
    }
    const UNSET: usize = usize::MAX;
    let mut labels = vec![UNSET; n];
    let mut ordered_modes = Vec::with_capacity(modes.len());
    for &i in &dt.order {
        if is_mode[i] {
            labels[i] = ordered_modes.len();
            ordered_modes.push(i);
        } else {
            let p = dt.parent[i].expect("only the root lacks a parent, and it is a mode");
            debug_assert_ne!(labels[p], UNSET);
            labels[i] = labels[p];
        }
    }
    Ok(ClusterResult {
        labels,
        modes: ordered_modes,
        meta: ClusterMeta::default(),
    })
}

/// [`assign_clusters`] after checking that no mode was trimmed from the diagram.
pub fn assign_from_diagram<T: Scalar>(
    dia: &ModeDiagram<T>,
    modes: &[usize],
) -> Result<ClusterResult<T>> {
    if let Some(m) = modes
        .iter()
        .find(|m| dia.trimmed.iter().any(|e| e.index == **m))
    {
        return Err(Error::invalid(format!(
            "mode {m} was trimmed from the diagram"
        )));
    }
    assign_clusters(&dia.delta_table, modes)
}

fn pairs(k: f64) -> f64 {
    k * (k - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same points.
///
/// When both partitions are trivial in the same way (expected index equals
/// the maximum) the score is 1.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + Hash + Copy,
    B: Eq + Hash + Copy,
{
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "label vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut table: HashMap<(A, B), u64> = HashMap::new();
    let mut rows: HashMap<A, u64> = HashMap::new();
    let mut cols: HashMap<B, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c as f64)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c as f64)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c as f64)).sum();
    let total = pairs(a.len() as f64);
    let expected = if total > 0.0 {
        sum_a * sum_b / total
    } else {
        0.0
    };
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
