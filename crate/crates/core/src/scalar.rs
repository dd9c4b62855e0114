//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Pairwise (cascade) summation. Blocks of 32 are summed directly.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut acc = T::zero();
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(x)` without materializing the mapped slice.
pub fn pairwise_sum_by<T: Real, U, F: Fn(&U) -> T + Copy>(xs: &[U], f: F) -> T {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut acc = T::zero();
        for x in xs {
            acc += f(x);
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum_by(&xs[..mid], f) + pairwise_sum_by(&xs[mid..], f)
}

/// Pairwise sum of `f(i)` over `i in range`.
pub fn pairwise_sum_indexed<T: Real, F: Fn(usize) -> T + Copy>(range: std::ops::Range<usize>, f: F) -> T {
    const BLOCK: usize = 32;
    if range.len() <= BLOCK {
        let mut acc = T::zero();
        for i in range {
            acc += f(i);
        }
        return acc;
    }
    let mid = range.start + range.len() / 2;
    pairwise_sum_indexed(range.start..mid, f) + pairwise_sum_indexed(mid..range.end, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
        assert_eq!(pairwise_sum_by(&xs, |x| 2.0 * x), 1_001_000.0);
        assert_eq!(pairwise_sum_indexed(0..1001, |i| i as f64), 500_500.0);
    }

    #[test]
    fn pairwise_beats_naive_on_many_small_terms() {
        let xs = vec![0.1f32; 1_000_000];
        let naive: f32 = xs.iter().fold(0.0, |a, &b| a + b);
        let pw = pairwise_sum(&xs);
        assert!((pw - 100_000.0).abs() < (naive - 100_000.0).abs());
        assert!((pw - 100_000.0).abs() < 1.0);
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }
}
