use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used for coordinates, densities and distances.
///
/// Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Widens to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    /// Converts a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Squared Euclidean distance, accumulated in coordinate order.
///
/// Every distance comparison in the crate goes through this function so that
/// different search strategies see bit-identical values.
#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        let diff = *x - *y;
        acc = acc + diff * diff;
    }
    acc
}

/// Median of a slice (average of the two middle values for even lengths).
/// Returns `None` for an empty slice. The input order is not preserved.
pub fn median_in_place<T: Scalar>(values: &mut [T]) -> Option<T> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("median of NaN");
    let mid = n / 2;
    let (lower, upper_mid, _) = values.select_nth_unstable_by(mid, cmp);
    let upper = *upper_mid;
    if n % 2 == 1 {
        Some(upper)
    } else {
        let lower_max =
            lower
                .iter()
                .copied()
                .fold(T::neg_infinity(), |acc, v| if v > acc { v } else { acc });
        Some((lower_max + upper) / T::of(2.0))
    }
}
