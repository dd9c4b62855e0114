//! Explicit normal-approximation bounds for ψ_n and the Hoeffding-type
//! lower-tail bound used for sums of squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Berry–Esseen constant for the Kolmogorov bound.
pub const BERRY_ESSEEN: f64 = 0.56;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    /// `d_K(ψ_n, Z) <= 0.56 ξ₃ Δ`
    Kolmogorov,
    /// `d_W(ψ_n, Z) <= ξ₃ Δ`
    Wasserstein,
    /// Kolmogorov bound with Rademacher weights (`ξ₃ = 1`), i.e. for `S_n/V_n`
    /// under sign symmetry.
    KolmogorovSymmetric,
    WassersteinSymmetric,
    /// `d_W(ψ_n, √n ρ_n) <= sqrt(2 m₄ / n)`
    Switch,
    /// `P(Σ <= x) <= exp(-(μ - x)² / (2σ²))`
    HoeffdingTail,
}

/// Inputs a bound was evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundInputs<T> {
    pub xi3: Option<T>,
    pub delta: Option<T>,
    pub m4: Option<T>,
    pub n: Option<usize>,
    pub mu: Option<T>,
    pub sigma2: Option<T>,
    pub x: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport<T> {
    pub value: T,
    pub kind: BoundKind,
    pub inputs: BoundInputs<T>,
    /// Whether the preconditions of the bound hold. An invalid report shows
    /// the magnitude only and must not be used as a certificate.
    pub valid: bool,
}

fn check_xi3_delta<T: Real>(xi3: T, delta: T) -> Result<()> {
    if !(xi3 >= T::one()) {
        return Err(Error::Precondition(format!(
            "ξ₃ = E|X|³ must be at least 1 when EX² = 1 (Jensen), got {xi3}"
        )));
    }
    if !(delta > T::zero()) || !delta.is_finite() || !xi3.is_finite() {
        return Err(Error::Precondition(format!(
            "Δ must be positive and finite, got {delta}"
        )));
    }
    Ok(())
}

fn lemma_bound<T: Real>(kind: BoundKind, constant: T, xi3: T, delta: T) -> Result<BoundReport<T>> {
    check_xi3_delta(xi3, delta)?;
    Ok(BoundReport {
        value: constant * xi3 * delta,
        kind,
        inputs: BoundInputs {
            xi3: Some(xi3),
            delta: Some(delta),
            ..Default::default()
        },
        valid: true,
    })
}

/// `0.56 ξ₃ Δ`.
pub fn bound_kolmogorov<T: Real>(xi3: T, delta: T) -> Result<BoundReport<T>> {
    lemma_bound(BoundKind::Kolmogorov, T::lit(BERRY_ESSEEN), xi3, delta)
}

/// `ξ₃ Δ`.
pub fn bound_wasserstein<T: Real>(xi3: T, delta: T) -> Result<BoundReport<T>> {
    lemma_bound(BoundKind::Wasserstein, T::one(), xi3, delta)
}

/// `0.56 Δ` for `S_n/V_n` with sign-symmetric Y.
pub fn bound_kolmogorov_symmetric<T: Real>(delta: T) -> Result<BoundReport<T>> {
    let mut r = bound_kolmogorov(T::one(), delta)?;
    r.kind = BoundKind::KolmogorovSymmetric;
    Ok(r)
}

/// `Δ` for `S_n/V_n` with sign-symmetric Y.
pub fn bound_wasserstein_symmetric<T: Real>(delta: T) -> Result<BoundReport<T>> {
    let mut r = bound_wasserstein(T::one(), delta)?;
    r.kind = BoundKind::WassersteinSymmetric;
    Ok(r)
}

/// Whether `n / log n >= 8 m₄`, the regime where the switch bound holds.
pub fn switch_valid<T: Real>(m4: T, n: usize) -> bool {
    if n <= 1 {
        return false;
    }
    let nf = T::from_usize_lossy(n);
    nf / nf.ln() >= T::lit(8.0) * m4
}

/// `sqrt(2 m₄ / n)` for `d_W(ψ_n, √n ρ_n)`, flagged invalid outside
/// `n / log n >= 8 m₄`.
pub fn bound_switch<T: Real>(m4: T, n: usize) -> Result<BoundReport<T>> {
    if !(m4 >= T::one()) || !m4.is_finite() {
        return Err(Error::Precondition(format!(
            "m₄ = EX⁴ must be at least 1 when EX² = 1 (Jensen), got {m4}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    Ok(BoundReport {
        value: (T::lit(2.0) * m4 / T::from_usize_lossy(n)).sqrt(),
        kind: BoundKind::Switch,
        inputs: BoundInputs {
            m4: Some(m4),
            n: Some(n),
            ..Default::default()
        },
        valid: switch_valid(m4, n),
    })
}

/// `exp(-(μ - x)² / (2σ²))` for `0 < x < μ`.
pub fn hoeffding_tail<T: Real>(mu: T, sigma2: T, x: T) -> Result<BoundReport<T>> {
    if !(sigma2 > T::zero()) || !sigma2.is_finite() {
        return Err(Error::Domain(format!("σ² must be positive, got {sigma2}")));
    }
    if !(x > T::zero() && x < mu) || !mu.is_finite() {
        return Err(Error::Domain(format!("need 0 < x < μ, got x = {x}, μ = {mu}")));
    }
    let gap = mu - x;
    Ok(BoundReport {
        value: (-gap * gap / (T::lit(2.0) * sigma2)).exp(),
        kind: BoundKind::HoeffdingTail,
        inputs: BoundInputs {
            mu: Some(mu),
            sigma2: Some(sigma2),
            x: Some(x),
            ..Default::default()
        },
        valid: true,
    })
}
