//! Statistics computed from realized samples: ψ_n, V_n, B_n, ρ_n, T_n,
//! S_n/V_n and the self-normalized weights δ_k = Y_k / V_n.

use crate::error::{Error, Result, Side};
use crate::scalar::{pairwise_sum_by, pairwise_sum_indexed, Real};

/// Paired weights `x` and observations `y` of equal length n >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair<T> {
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Real> SamplePair<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(x.len(), y.len()));
        }
        if x.is_empty() {
            return Err(Error::Domain("sample pair needs n >= 1".into()));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// δ_k = Y_k / V_n. The entries have unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVector<T> {
    delta: Vec<T>,
}

impl<T: Real> DeltaVector<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.delta
    }

    pub fn n(&self) -> usize {
        self.delta.len()
    }

    /// Σ |δ_k|^{2γ}; γ = 3/2 gives Σ |δ_k|³.
    pub fn abs_power_sum(&self, gamma: T) -> T {
        pairwise_sum_by(&self.delta, |&d| half_power(d * d, gamma))
    }

    pub fn sum_squares(&self) -> T {
        pairwise_sum_by(&self.delta, |&d| d * d)
    }
}

#[inline]
fn half_power<T: Real>(w: T, gamma: T) -> T {
    if gamma == T::lit(1.5) {
        w * w.sqrt()
    } else if gamma == T::one() {
        w
    } else {
        w.powf(gamma)
    }
}

/// Euclidean norm, rescaling by the largest magnitude when squaring could
/// overflow or underflow.
pub fn euclidean_norm<T: Real>(v: &[T]) -> T {
    let big = T::max_value().sqrt() * T::lit(1e-4);
    let small = T::min_positive_value().sqrt() * T::lit(1e4);
    let m = v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    if m == T::zero() {
        return T::zero();
    }
    if m > big || m < small {
        let inv = m.recip();
        m * pairwise_sum_by(v, |&x| {
            let s = x * inv;
            s * s
        })
        .sqrt()
    } else {
        pairwise_sum_by(v, |&x| x * x).sqrt()
    }
}

fn nonzero_norm<T: Real>(v: &[T], side: Side) -> Result<T> {
    if let Some(i) = v.iter().position(|x| x.is_nan()) {
        return Err(Error::NaN(i));
    }
    let norm = euclidean_norm(v);
    if norm == T::zero() {
        Err(Error::DegenerateSample(side))
    } else {
        Ok(norm)
    }
}

/// V_n = (Σ y_i²)^{1/2}.
pub fn v_norm<T: Real>(y: &[T]) -> Result<T> {
    nonzero_norm(y, Side::Y)
}

/// B_n = (Σ x_i²)^{1/2}.
pub fn b_norm<T: Real>(x: &[T]) -> Result<T> {
    nonzero_norm(x, Side::X)
}

/// ψ_n = Σ x_i y_i / V_n.
pub fn self_norm_weighted<T: Real>(pair: &SamplePair<T>) -> Result<T> {
    psi_slices(&pair.x, &pair.y)
}

/// ψ_n on borrowed slices of equal length.
pub fn psi_slices<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let v = v_norm(y)?;
    let inv = v.recip();
    Ok(pairwise_sum_indexed(0..y.len(), |i| x[i] * (y[i] * inv)))
}

/// The weight vector δ_k = y_k / V_n.
pub fn delta_vector<T: Real>(y: &[T]) -> Result<DeltaVector<T>> {
    let v = v_norm(y)?;
    let inv = v.recip();
    Ok(DeltaVector {
        delta: y.iter().map(|&yi| yi * inv).collect(),
    })
}

/// Σ_k |y_k / V_n|^{2γ} without materializing δ.
pub fn weight_power_sum<T: Real>(y: &[T], gamma: T) -> Result<T> {
    let v = v_norm(y)?;
    let inv = v.recip();
    Ok(pairwise_sum_by(y, |&yi| {
        let d = yi * inv;
        half_power(d * d, gamma)
    }))
}

/// ρ_n = Σ x_k y_k / (B_n V_n), clamped to [-1, 1].
pub fn correlation_stat<T: Real>(pair: &SamplePair<T>) -> Result<T> {
    rho_slices(&pair.x, &pair.y)
}

/// ρ_n on borrowed slices of equal length.
pub fn rho_slices<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let b = b_norm(x)?;
    let v = v_norm(y)?;
    let (ib, iv) = (b.recip(), v.recip());
    let r = pairwise_sum_indexed(0..y.len(), |i| (x[i] * ib) * (y[i] * iv));
    Ok(r.max(-T::one()).min(T::one()))
}

/// √n ρ_n, the scaled correlation statistic compared against ψ_n.
pub fn scaled_correlation<T: Real>(pair: &SamplePair<T>) -> Result<T> {
    Ok(T::from_usize_lossy(pair.n()).sqrt() * correlation_stat(pair)?)
}

/// Student's T_n from ψ_n = ψ_n(1, Y): T_n = ψ_n ((n-1)/(n-ψ_n²))^{1/2}.
pub fn student_t_from_psi<T: Real>(psi: T, n: usize) -> Result<T> {
    if n < 2 {
        return Err(Error::Domain(format!("Student t needs n >= 2, got {n}")));
    }
    let nf = T::from_usize_lossy(n);
    let denom = nf - psi * psi;
    if !(denom > T::zero()) {
        return Err(Error::Domain(format!(
            "Student t needs psi^2 < n, got psi = {psi}, n = {n}"
        )));
    }
    Ok(psi * ((nf - T::one()) / denom).sqrt())
}

/// S_n / V_n = Σ y_i / V_n.
pub fn self_norm_plain<T: Real>(y: &[T]) -> Result<T> {
    let v = v_norm(y)?;
    let inv = v.recip();
    Ok(pairwise_sum_by(y, |&yi| yi * inv))
}
