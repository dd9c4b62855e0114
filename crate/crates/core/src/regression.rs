//! Least-squares rate exponents on log-log scale.

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, pairwise_sum_indexed, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
    /// Standard error of the slope; zero for a perfect fit and undefined
    /// (NaN) with only two points.
    pub slope_stderr: T,
    pub n_range: (usize, usize),
    pub points: usize,
}

/// Fit `log value = intercept + slope · log n`.
pub fn fit_rate<T: Real>(ns: &[usize], values: &[T]) -> Result<RateFit<T>> {
    if ns.len() != values.len() {
        return Err(Error::LengthMismatch(ns.len(), values.len()));
    }
    if ns.len() < 3 {
        return Err(Error::Domain(format!(
            "a rate fit needs at least 3 points, got {}",
            ns.len()
        )));
    }
    if let Some((n, v)) = ns
        .iter()
        .zip(values)
        .find(|(&n, v)| !(**v > T::zero()) || !v.is_finite() || n == 0)
    {
        return Err(Error::Domain(format!(
            "rate fit needs positive finite values, got {v} at n = {n}"
        )));
    }
    let k = ns.len();
    let kf = T::from_usize_lossy(k);
    let xs: Vec<T> = ns.iter().map(|&n| T::from_usize_lossy(n).ln()).collect();
    let ys: Vec<T> = values.iter().map(|v| v.ln()).collect();
    let mx = pairwise_sum(&xs) / kf;
    let my = pairwise_sum(&ys) / kf;
    let sxx = pairwise_sum_indexed(0..k, |i| (xs[i] - mx) * (xs[i] - mx));
    if sxx == T::zero() {
        return Err(Error::Domain("rate fit needs at least two distinct n".into()));
    }
    let sxy = pairwise_sum_indexed(0..k, |i| (xs[i] - mx) * (ys[i] - my));
    let syy = pairwise_sum_indexed(0..k, |i| (ys[i] - my) * (ys[i] - my));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = pairwise_sum_indexed(0..k, |i| {
        let r = ys[i] - intercept - slope * xs[i];
        r * r
    });
    let r_squared = if syy == T::zero() {
        T::one()
    } else {
        (T::one() - ss_res / syy).max(T::zero()).min(T::one())
    };
    let slope_stderr = (ss_res / (kf - T::lit(2.0)) / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        n_range: (*ns.iter().min().unwrap(), *ns.iter().max().unwrap()),
        points: k,
    })
}
