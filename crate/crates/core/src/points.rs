//! Sample storage and dataset-level distances.

use crate::error::{Error, Result};
use crate::scalar::{squared_distance, Scalar};

/// An immutable `n × d` table of sample coordinates, stored row-major.
///
/// Row `i` always refers to the same sample; nothing in the crate reorders
/// rows behind the caller's back.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<T: Scalar = f64> {
    coords: Vec<T>,
    n: usize,
    d: usize,
}

impl<T: Scalar> PointSet<T> {
    /// Builds a point set from row-major coordinates.
    pub fn new(coords: Vec<T>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if coords.is_empty() {
            return Err(Error::invalid("point set must contain at least one point"));
        }
        if !coords.len().is_multiple_of(d) {
            return Err(Error::invalid(format!(
                "{} coordinates do not divide into rows of dimension {d}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate in row {} column {}",
                pos / d,
                pos % d
            )));
        }
        let n = coords.len() / d;
        Ok(Self { coords, n, d })
    }

    /// Builds a point set from a list of rows of equal length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let d = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::invalid("point set must contain at least one point"))?;
        let mut coords = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::invalid(format!(
                    "row {i} has {} columns, expected {d}",
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        Self::new(coords, d)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false; a point set holds at least one row.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.coords.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.coords
    }

    /// Returns a copy with rows rearranged so that output row `k` is input row `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::invalid(
                "permutation length differs from point count",
            ));
        }
        let mut coords = Vec::with_capacity(self.coords.len());
        for &p in perm {
            self.check_index(p)?;
            coords.extend_from_slice(self.row(p));
        }
        Self::new(coords, self.d)
    }

    /// Converts every coordinate to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Result<PointSet<U>> {
        PointSet::new(
            self.coords.iter().map(|c| U::of(c.as_f64())).collect(),
            self.d,
        )
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.n,
            })
        }
    }

    /// Per-coordinate sample standard deviations (denominator `n - 1`).
    pub fn marginal_std(&self) -> Vec<T> {
        let n = T::from_count(self.n);
        let mut mean = vec![T::zero(); self.d];
        for row in self.rows() {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m = *m + x;
            }
        }
        for m in &mut mean {
            *m = *m / n;
        }
        let mut var = vec![T::zero(); self.d];
        for row in self.rows() {
            for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(row) {
                *v = *v + (x - m) * (x - m);
            }
        }
        let denom = T::from_count(self.n.saturating_sub(1).max(1));
        var.into_iter().map(|v| (v / denom).sqrt()).collect()
    }

    /// Coordinate-wise mean.
    pub fn centroid(&self) -> Vec<T> {
        let n = T::from_count(self.n);
        let mut c = vec![T::zero(); self.d];
        for row in self.rows() {
            for (m, &x) in c.iter_mut().zip(row) {
                *m = *m + x;
            }
        }
        c.into_iter().map(|m| m / n).collect()
    }
}

/// Largest pairwise distance in a point set.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Diameter<T: Scalar = f64>(pub T);

impl<T: Scalar> Diameter<T> {
    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

/// Euclidean distance between rows `i` and `j`.
pub fn pairwise_distance<T: Scalar>(ps: &PointSet<T>, i: usize, j: usize) -> Result<T> {
    ps.check_index(i)?;
    ps.check_index(j)?;
    Ok(squared_distance(ps.row(i), ps.row(j)).sqrt())
}

/// Exact maximum pairwise Euclidean distance.
///
/// Points are visited in decreasing distance from the centroid; the pair
/// bound `r_i + r_j` then lets the scan stop early. The bound carries a small
/// relative slack so rounding can never prune the true maximum, and the
/// returned value is the same `squared_distance` the exhaustive scan would
/// produce.
pub fn diameter<T: Scalar>(ps: &PointSet<T>) -> Diameter<T> {
    let n = ps.len();
    if n < 2 {
        return Diameter(T::zero());
    }
    let c = ps.centroid();
    let radius: Vec<T> = ps.rows().map(|r| squared_distance(r, &c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| radius[b].partial_cmp(&radius[a]).expect("finite radius"));

    let slack = T::one() + T::of(16.0) * T::epsilon().sqrt();
    let mut best_sq = T::zero();
    let mut best = T::zero();
    for (a, &i) in order.iter().enumerate() {
        if (radius[i] + radius[i]) * slack < best {
            break;
        }
        let xi = ps.row(i);
        for &j in &order[a + 1..] {
            if (radius[i] + radius[j]) * slack < best {
                break;
            }
            let sq = squared_distance(xi, ps.row(j));
            if sq > best_sq {
                best_sq = sq;
                best = sq.sqrt();
            }
        }
    }
    Diameter(best_sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_diameter(ps: &PointSet<f64>) -> f64 {
        let mut best = 0.0f64;
        for i in 0..ps.len() {
            for j in i + 1..ps.len() {
                best = best.max(squared_distance(ps.row(i), ps.row(j)));
            }
        }
        best.sqrt()
    }

    #[test]
    fn single_point_has_zero_diameter() {
        let ps = PointSet::from_rows(&[[0.0, 0.0]]).unwrap();
        assert_eq!(diameter(&ps).value(), 0.0);
    }

    #[test]
    fn three_four_five() {
        let ps = PointSet::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(diameter(&ps).value(), 5.0);
    }

    #[test]
    fn matches_exhaustive_scan_on_uniform_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<[f64; 2]> = (0..100).map(|_| [rng.random(), rng.random()]).collect();
        let ps = PointSet::from_rows(&rows).unwrap();
        assert_eq!(diameter(&ps).value(), brute_diameter(&ps));
    }

    #[test]
    fn matches_exhaustive_scan_in_higher_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..=6 {
            let coords: Vec<f64> = (0..150 * d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ps = PointSet::new(coords, d).unwrap();
            assert_eq!(diameter(&ps).value(), brute_diameter(&ps), "d = {d}");
        }
    }

    #[test]
    fn coincident_points() {
        let ps = PointSet::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(diameter(&ps).value(), 0.0);
    }

    #[test]
    fn pairwise_distance_cases() {
        let ps = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(pairwise_distance(&ps, 0, 0).unwrap(), 0.0);
        assert_eq!(pairwise_distance(&ps, 0, 1).unwrap(), 1.0);
        assert!(matches!(
            pairwise_distance(&ps, 0, 2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn pairwise_distance_3d_against_componentwise_formula() {
        let ps: PointSet<f64> = PointSet::from_rows(&[[0.3, -1.2, 2.5], [1.7, 0.4, -0.9]]).unwrap();
        let (a, b) = (ps.row(0), ps.row(1));
        let expect = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        assert!((pairwise_distance(&ps, 0, 1).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(PointSet::new(vec![0.0, f64::NAN], 2).is_err());
        assert!(PointSet::new(vec![f64::INFINITY], 1).is_err());
        assert!(PointSet::<f64>::new(vec![], 1).is_err());
        assert!(PointSet::new(vec![1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let ps = PointSet::from_rows(&[[0.0f32, 0.0], [3.0, 4.0], [1.0, 1.0]]).unwrap();
        assert_eq!(diameter(&ps).value(), 5.0f32);
    }
}
