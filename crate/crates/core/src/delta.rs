//! Distance from each point to its nearest neighbor of higher density.
//!
//! Densities are compared under a strict total order: `j` ranks above `i`
//! when `dens[j] > dens[i]`, or when the densities are equal and `j < i`.
//! The order makes the maximum unique, so exactly one point (the root) has no
//! higher neighbor, even with duplicated points or tied densities. Among
//! equidistant candidates the smallest index wins.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kdtree::RankedKdTree;
use crate::points::{diameter, PointSet};
use crate::scalar::{squared_distance, Scalar};

/// Value assigned to the root's δ.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RootDelta<T: Scalar = f64> {
    /// Maximum pairwise distance of the data.
    #[default]
    Diameter,
    Fixed(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable<T: Scalar = f64> {
    /// δ for every point; `delta[root] == root_delta`.
    pub delta: Vec<T>,
    /// Nearest higher-density neighbor; `None` only at the root.
    pub parent: Vec<Option<usize>>,
    pub root: usize,
    /// The constant `L` given to the root.
    pub root_delta: T,
    /// Point indices sorted from highest to lowest density under the total order.
    pub order: Vec<usize>,
}

impl<T: Scalar> DeltaTable<T> {
    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    /// Position of every point in `order` (0 for the root).
    pub fn ranks(&self) -> Vec<usize> {
        let mut rank = vec![0; self.order.len()];
        for (r, &i) in self.order.iter().enumerate() {
            rank[i] = r;
        }
        rank
    }
}

/// True when `j` ranks strictly above `i` in the density total order.
#[inline]
pub fn ranks_above<T: Scalar>(dens: &[T], j: usize, i: usize) -> bool {
    dens[j] > dens[i] || (dens[j] == dens[i] && j < i)
}

/// Indices sorted by decreasing density, ties by increasing index.
pub fn density_order<T: Scalar>(dens: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dens.len()).collect();
    order.sort_by(|&a, &b| {
        dens[b]
            .partial_cmp(&dens[a])
            .expect("densities validated finite")
            .then(a.cmp(&b))
    });
    order
}

fn validate<T: Scalar>(ps: &PointSet<T>, dens: &[T], root: RootDelta<T>) -> Result<T> {
    if ps.len() < 2 {
        return Err(Error::degenerate("δ needs at least 2 points"));
    }
    if dens.len() != ps.len() {
        return Err(Error::invalid(format!(
            "{} density values for {} points",
            dens.len(),
            ps.len()
        )));
    }
    if dens.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("density values must be finite"));
    }
    match root {
        RootDelta::Diameter => Ok(diameter(ps).value()),
        RootDelta::Fixed(l) if l.is_finite() && l > T::zero() => Ok(l),
        RootDelta::Fixed(l) => Err(Error::invalid(format!("root δ must be positive, got {l}"))),
    }
}

fn assemble<T: Scalar>(
    nearest: Vec<Option<(usize, T)>>,
    order: Vec<usize>,
    root_delta: T,
) -> DeltaTable<T> {
    let root = order[0];
    let mut delta = Vec::with_capacity(nearest.len());
    let mut parent = Vec::with_capacity(nearest.len());
    for nb in nearest {
        match nb {
            Some((j, sq)) => {
                delta.push(sq.sqrt());
                parent.push(Some(j));
            }
            None => {
                delta.push(root_delta);
                parent.push(None);
            }
        }
    }
    DeltaTable {
        delta,
        parent,
        root,
        root_delta,
        order,
    }
}

/// Literal O(n²) evaluation of δ with the diameter as the root's value.
pub fn compute_delta_bruteforce<T: Scalar>(ps: &PointSet<T>, dens: &[T]) -> Result<DeltaTable<T>> {
    compute_delta_bruteforce_with(ps, dens, RootDelta::Diameter)
}

pub fn compute_delta_bruteforce_with<T: Scalar>(
    ps: &PointSet<T>,
    dens: &[T],
    root: RootDelta<T>,
) -> Result<DeltaTable<T>> {
    let root_delta = validate(ps, dens, root)?;
    let nearest: Vec<Option<(usize, T)>> = (0..ps.len())
        .into_par_iter()
        .map(|i| {
            let xi = ps.row(i);
            let mut best: Option<(usize, T)> = None;
            for j in 0..ps.len() {
                if !ranks_above(dens, j, i) {
                    continue;
                }
                let sq = squared_distance(xi, ps.row(j));
                // j ascends, so a strict comparison keeps the smallest index on ties.
                if best.is_none_or(|(_, b)| sq < b) {
                    best = Some((j, sq));
                }
            }
            best
        })
        .collect();
    Ok(assemble(nearest, density_order(dens), root_delta))
}

/// Same table as [`compute_delta_bruteforce`], found through a k-d tree that
/// restricts each search to points ranked above the query.
pub fn compute_delta_indexed<T: Scalar>(ps: &PointSet<T>, dens: &[T]) -> Result<DeltaTable<T>> {
    compute_delta_indexed_with(ps, dens, RootDelta::Diameter)
}

pub fn compute_delta_indexed_with<T: Scalar>(
    ps: &PointSet<T>,
    dens: &[T],
    root: RootDelta<T>,
) -> Result<DeltaTable<T>> {
    let root_delta = validate(ps, dens, root)?;
    let order = density_order(dens);
    let mut rank = vec![0usize; ps.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let tree = RankedKdTree::build(ps, &rank);
    let nearest: Vec<Option<(usize, T)>> = (0..ps.len())
        .into_par_iter()
        .map(|i| tree.nearest_below_rank(ps.row(i), rank[i]))
        .collect();
    Ok(assemble(nearest, order, root_delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{kde_self, Bandwidth};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_points() {
        let ps = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let dens = [0.2, 0.3];
        for dt in [
            compute_delta_bruteforce(&ps, &dens).unwrap(),
            compute_delta_indexed(&ps, &dens).unwrap(),
        ] {
            assert_eq!(dt.delta, vec![1.0, 1.0]);
            assert_eq!(dt.parent, vec![Some(1), None]);
            assert_eq!(dt.root, 1);
        }
    }

    #[test]
    fn equal_densities_follow_index_order() {
        let ps = PointSet::from_rows(&[[0.0], [5.0], [1.0], [7.0], [-2.0]]).unwrap();
        let dens = [0.5; 5];
        let dt = compute_delta_bruteforce(&ps, &dens).unwrap();
        assert_eq!(dt.root, 0);
        for i in 1..5 {
            assert!(dt.parent[i].unwrap() < i);
        }
        assert_eq!(dt.parent[1], Some(0));
        assert_eq!(dt.parent[3], Some(1));
        assert_eq!(compute_delta_indexed(&ps, &dens).unwrap(), dt);
    }

    #[test]
    fn fixed_root_delta() {
        let ps = PointSet::from_rows(&[[0.0], [3.0]]).unwrap();
        let dt = compute_delta_indexed_with(&ps, &[1.0, 0.5], RootDelta::Fixed(42.0)).unwrap();
        assert_eq!(dt.delta, vec![42.0, 3.0]);
        assert!(compute_delta_bruteforce_with(&ps, &[1.0, 0.5], RootDelta::Fixed(0.0)).is_err());
    }

    #[test]
    fn errors() {
        let one = PointSet::from_rows(&[[0.0]]).unwrap();
        assert!(matches!(
            compute_delta_bruteforce(&one, &[1.0]),
            Err(Error::Degenerate(_))
        ));
        let two = PointSet::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(compute_delta_indexed(&two, &[1.0]).is_err());
        assert!(compute_delta_indexed(&two, &[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn duplicates_resolve_like_bruteforce() {
        let rows = [
            [0.0, 0.0],
            [1.0, 1.0],
            [0.0, 0.0],
            [1.0, 1.0],
            [0.0, 0.0],
            [2.0, 0.0],
        ];
        let ps = PointSet::from_rows(&rows).unwrap();
        let dens = [0.3, 0.3, 0.3, 0.1, 0.3, 0.1];
        let brute = compute_delta_bruteforce(&ps, &dens).unwrap();
        assert_eq!(compute_delta_indexed(&ps, &dens).unwrap(), brute);
        assert_eq!(brute.root, 0);
        assert_eq!(brute.parent[2], Some(0));
        assert_eq!(brute.delta[2], 0.0);
        assert_eq!(brute.parent[4], Some(0));
        assert_eq!(brute.parent[3], Some(1));
    }

    #[test]
    fn kde_dataset_indexed_equals_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coords: Vec<f64> = (0..600).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ps = PointSet::new(coords, 2).unwrap();
        let est = kde_self(&ps, &Bandwidth::fixed(0.4).unwrap()).unwrap();
        assert_eq!(
            compute_delta_indexed(&ps, &est.values).unwrap(),
            compute_delta_bruteforce(&ps, &est.values).unwrap()
        );
    }

    #[test]
    fn single_precision_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coords: Vec<f32> = (0..900).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let ps = PointSet::new(coords, 3).unwrap();
        let dens: Vec<f32> = (0..300).map(|_| rng.random_range(0.0f32..1.0)).collect();
        assert_eq!(
            compute_delta_indexed(&ps, &dens).unwrap(),
            compute_delta_bruteforce(&ps, &dens).unwrap()
        );
    }
}
