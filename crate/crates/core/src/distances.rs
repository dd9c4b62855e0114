//! Empirical Kolmogorov and Wasserstein-1 distances, to the standard normal
//! and between two samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Real};
use crate::specfun::{normal_cdf, normal_cdf_antideriv, normal_quantile};

/// Confidence level of the attached DKW hint.
pub const DKW_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceKind {
    Kolmogorov,
    Wasserstein,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate<T> {
    pub value: T,
    pub kind: DistanceKind,
    /// Sample size (the smaller one for two-sample distances).
    pub m: usize,
    /// DKW radius at 95%: `sqrt(log(2/0.05) / (2m))`. Kolmogorov only.
    pub mc_error_hint: Option<T>,
}

/// `sqrt(log(2/(1-confidence)) / (2m))`.
pub fn dkw_radius<T: Real>(m: usize) -> T {
    let ln = (2.0 / (1.0 - DKW_CONFIDENCE)).ln();
    T::lit((ln / (2.0 * m as f64)).sqrt())
}

fn sorted_checked<T: Real>(sample: &[T]) -> Result<Vec<T>> {
    if sample.is_empty() {
        return Err(Error::Domain("distance needs a non-empty sample".into()));
    }
    if let Some(i) = sample.iter().position(|v| v.is_nan()) {
        return Err(Error::NaN(i));
    }
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN filtered above"));
    Ok(v)
}

/// `sup_x |F_m(x) - Φ(x)|`, evaluated at both sides of every jump.
pub fn kolmogorov_to_normal<T: Real>(sample: &[T]) -> Result<DistanceEstimate<T>> {
    let xs = sorted_checked(sample)?;
    let m = xs.len();
    let mf = T::from_usize_lossy(m);
    let mut best = T::zero();
    for (i, &x) in xs.iter().enumerate() {
        let p = normal_cdf(x);
        let above = T::from_usize_lossy(i + 1) / mf - p;
        let below = p - T::from_usize_lossy(i) / mf;
        best = best.max(above).max(below);
    }
    Ok(DistanceEstimate {
        value: best.min(T::one()),
        kind: DistanceKind::Kolmogorov,
        m,
        mc_error_hint: Some(dkw_radius(m)),
    })
}

/// `∫Φ` and `∫(1-Φ)` over `[a, b]`, each taken from the side where the
/// antiderivative is small so the difference loses little precision.
fn cdf_integrals<T: Real>(a: T, b: T) -> (T, T) {
    let h = b - a;
    if a >= T::zero() {
        // ∫_a^b (1-Φ) = A(-a) - A(-b)
        let upper = normal_cdf_antideriv(-a) - normal_cdf_antideriv(-b);
        (h - upper, upper)
    } else {
        let lower = normal_cdf_antideriv(b) - normal_cdf_antideriv(a);
        (lower, h - lower)
    }
}

/// `∫_a^b |c - Φ(t)| dt` for a level `c` in (0, 1).
fn abs_gap<T: Real>(a: T, b: T, c: T, crossing: T) -> T {
    let gap_above = |lo: T, hi: T| {
        // Φ >= c on [lo, hi]
        let (_, upper) = cdf_integrals(lo, hi);
        ((T::one() - c) * (hi - lo) - upper).max(T::zero())
    };
    let gap_below = |lo: T, hi: T| {
        // Φ <= c on [lo, hi]
        let (lower, _) = cdf_integrals(lo, hi);
        (c * (hi - lo) - lower).max(T::zero())
    };
    if crossing <= a {
        gap_above(a, b)
    } else if crossing >= b {
        gap_below(a, b)
    } else {
        gap_below(a, crossing) + gap_above(crossing, b)
    }
}

/// `∫ |F_m(x) - Φ(x)| dx`, exact up to rounding: piecewise through the
/// antiderivative of Φ, splitting each gap at the point where Φ crosses the
/// empirical level, with closed-form tails outside the sample range.
pub fn wasserstein_to_normal<T: Real>(sample: &[T]) -> Result<DistanceEstimate<T>> {
    let xs = sorted_checked(sample)?;
    let m = xs.len();
    let mf = T::from_usize_lossy(m);
    let mut pieces = Vec::with_capacity(m + 1);
    pieces.push(normal_cdf_antideriv(xs[0]));
    pieces.push(normal_cdf_antideriv(-xs[m - 1]));
    for i in 1..m {
        let (a, b) = (xs[i - 1], xs[i]);
        if b <= a {
            continue;
        }
        let c = T::from_usize_lossy(i) / mf;
        let crossing = normal_quantile(c)?;
        pieces.push(abs_gap(a, b, c, crossing));
    }
    Ok(DistanceEstimate {
        value: pairwise_sum(&pieces),
        kind: DistanceKind::Wasserstein,
        m,
        mc_error_hint: None,
    })
}

/// Exact W₁ between two empirical laws of equal size: the mean absolute
/// difference of order statistics.
pub fn wasserstein_between<T: Real>(a: &[T], b: &[T]) -> Result<DistanceEstimate<T>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let xa = sorted_checked(a)?;
    let xb = sorted_checked(b)?;
    let diffs: Vec<T> = xa.iter().zip(&xb).map(|(&p, &q)| (p - q).abs()).collect();
    Ok(DistanceEstimate {
        value: pairwise_sum(&diffs) / T::from_usize_lossy(a.len()),
        kind: DistanceKind::Wasserstein,
        m: a.len(),
        mc_error_hint: None,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`. The hint is
/// the DKW-type radius for the effective size `mn/(m+n)`.
pub fn kolmogorov_between<T: Real>(a: &[T], b: &[T]) -> Result<DistanceEstimate<T>> {
    let xa = sorted_checked(a)?;
    let xb = sorted_checked(b)?;
    let (ma, mb) = (xa.len(), xb.len());
    let (fa, fb) = (T::from_usize_lossy(ma), T::from_usize_lossy(mb));
    let (mut i, mut j) = (0, 0);
    let mut best = T::zero();
    while i < ma && j < mb {
        let x = if xa[i] <= xb[j] { xa[i] } else { xb[j] };
        while i < ma && xa[i] == x {
            i += 1;
        }
        while j < mb && xb[j] == x {
            j += 1;
        }
        let d = (T::from_usize_lossy(i) / fa - T::from_usize_lossy(j) / fb).abs();
        best = best.max(d);
    }
    let eff = (ma as f64 * mb as f64 / (ma + mb) as f64).max(1.0);
    let hint = T::lit(((2.0 / (1.0 - DKW_CONFIDENCE)).ln() / (2.0 * eff)).sqrt());
    Ok(DistanceEstimate {
        value: best,
        kind: DistanceKind::Kolmogorov,
        m: ma.min(mb),
        mc_error_hint: Some(hint),
    })
}
