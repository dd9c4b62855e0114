//! `n E|δ₁,ₙ|^{2γ} = Σ_k E|Y_k/V_n|^{2γ}` three ways: Monte Carlo, the
//! exact Laplace-transform identity
//!
//! ```text
//! n E|δ₁,ₙ|^{2γ} = n/Γ(γ) ∫₀^∞ t^{γ-1} φ₁(t)^{n-1} φ₂(t; γ) dt,
//! ```
//!
//! and closed-form large-n asymptotics. `γ` is the half-order: `γ = 3/2`
//! gives `Δ = Σ E|δ_k|³`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    laplace_one_minus_phi1, laplace_phi1, laplace_phi2, DistributionSpec, ExtReal, TailModel, TailTarget,
};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, panels, QuadOptions};
use crate::rng::SeededStream;
use crate::scalar::pairwise_sum;
use crate::specfun::{gamma_fn, ln_gamma};
use crate::statistics::weight_power_sum;

/// Fewest replicates `delta_mc` accepts.
pub const MIN_REPLICATES: usize = 100;
/// Iteration budget of [`solve_an`].
pub const AN_MAX_ITER: usize = 200;
/// Relative residual [`solve_an`] must reach.
pub const AN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeltaMethod {
    MonteCarlo,
    LaplaceQuadrature,
    /// `E|Y/σ|^p n^{1-p/2}` for finite p-th moment, `2 < p <= 3`.
    AsymptoticFin3,
    /// Finite variance with regularly varying `Y²` tail, `1 <= α < 2`.
    AsymptoticFin,
    /// Infinite variance, `α = 1`: `ℓ(a_n) / ((γ-1) L(a_n))`.
    AsymptoticInf,
    /// n-free limit under a stable `|Y|` tail, `0 < α < 2`.
    AsymptoticStable,
}

impl DeltaMethod {
    pub fn name(self) -> &'static str {
        match self {
            DeltaMethod::MonteCarlo => "mc",
            DeltaMethod::LaplaceQuadrature => "laplace",
            DeltaMethod::AsymptoticFin3 => "asym_fin3",
            DeltaMethod::AsymptoticFin => "asym_fin",
            DeltaMethod::AsymptoticInf => "asym_inf",
            DeltaMethod::AsymptoticStable => "asym_stable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub value: f64,
    pub method: DeltaMethod,
    /// Sample size; 0 for the n-free stable limit.
    pub n: usize,
    pub gamma: f64,
    /// Monte Carlo standard error; 0 for deterministic methods.
    pub stderr: f64,
    /// Monte Carlo replicates; 0 for deterministic methods.
    pub replicates: usize,
    /// Whether Y was rescaled to unit variance first.
    pub rescaled: bool,
}

impl DeltaEstimate {
    fn exact(value: f64, method: DeltaMethod, n: usize, gamma: f64) -> Self {
        Self {
            value,
            method,
            n,
            gamma,
            stderr: 0.0,
            replicates: 0,
            rescaled: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnSolution {
    pub n: usize,
    pub a_n: f64,
    /// `|a_n - n L(a_n)| / a_n`
    pub residual: f64,
    pub iterations: usize,
}

fn check_gamma(gamma: f64, min: f64, strict: bool) -> Result<()> {
    let ok = if strict { gamma > min } else { gamma >= min };
    if ok && gamma.is_finite() {
        Ok(())
    } else {
        let rel = if strict { ">" } else { ">=" };
        Err(Error::Precondition(format!("γ must be {rel} {min}, got {gamma}")))
    }
}

/// Monte Carlo mean of `Σ_k |δ_k|^{2γ}` over independent samples of size `n`.
///
/// Replicate `r` draws from `stream.child(r)` and the per-replicate values
/// are reduced in replicate order, so the result does not depend on how
/// many worker threads run.
pub fn delta_mc(
    spec: &DistributionSpec,
    n: usize,
    gamma: f64,
    replicates: usize,
    stream: SeededStream,
) -> Result<DeltaEstimate> {
    check_gamma(gamma, 1.0, false)?;
    if replicates < MIN_REPLICATES {
        return Err(Error::Precondition(format!(
            "Monte Carlo needs at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    spec.validate()?;
    let values: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, r| {
                let mut rng = stream.child(r as u64).rng();
                spec.fill(&mut rng, buf);
                weight_power_sum(buf, gamma)
            },
        )
        .collect::<Result<_>>()?;
    let (mean, stderr) = mean_stderr(&values);
    Ok(DeltaEstimate {
        value: mean,
        method: DeltaMethod::MonteCarlo,
        n,
        gamma,
        stderr,
        replicates,
        rescaled: false,
    })
}

/// Mean and standard error of the mean, both pairwise-summed.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = pairwise_sum(values) / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Log of the Laplace-identity integrand in `u = log t`, including the
/// Jacobian `t`.
fn laplace_log_integrand(spec: &DistributionSpec, n: usize, gamma: f64, ln_pref: f64, u: f64) -> Result<f64> {
    let t = u.exp();
    let omega = laplace_one_minus_phi1(spec, t)?;
    let ln_phi1 = if omega < 0.5 {
        (-omega).ln_1p()
    } else {
        laplace_phi1(spec, t)?.ln()
    };
    let phi2 = laplace_phi2(spec, t, gamma)?;
    let tail = if n > 1 { (n - 1) as f64 * ln_phi1 } else { 0.0 };
    Ok(ln_pref + gamma * u + tail + phi2.ln())
}

/// Exact `n E|δ₁,ₙ|^{2γ}` from the Laplace identity, to about 1e-9 relative.
///
/// The integral runs in `u = log t`. The range is found by climbing to the
/// peak of the integrand and walking out until it falls below e^-40 of the
/// peak on both sides.
pub fn delta_laplace(spec: &DistributionSpec, n: usize, gamma: f64) -> Result<DeltaEstimate> {
    check_gamma(gamma, 1.0, true)?;
    if n < 2 {
        return Err(Error::Domain(format!("the Laplace identity needs n >= 2, got {n}")));
    }
    spec.validate()?;
    if !spec.capabilities().laplace {
        return Err(Error::Unsupported {
            law: spec.to_string(),
            what: "Laplace functionals".into(),
        });
    }
    if matches!(spec, DistributionSpec::PointMass { c } if *c == 0.0) {
        return Err(Error::DegenerateSample(crate::error::Side::Y));
    }
    let ln_pref = (n as f64).ln() - ln_gamma(gamma)?;
    let f = |u: f64| laplace_log_integrand(spec, n, gamma, ln_pref, u);

    // hill-climb from the finite-variance scale t ~ 1/n
    let mut u = -(n as f64).ln();
    let mut fu = f(u)?;
    for _ in 0..400 {
        let (l, r) = (f(u - 1.0)?, f(u + 1.0)?);
        if r > fu && r >= l {
            u += 1.0;
            fu = r;
        } else if l > fu {
            u -= 1.0;
            fu = l;
        } else {
            break;
        }
    }
    if !fu.is_finite() {
        return Err(Error::Quadrature(format!(
            "Laplace integrand has no finite peak for {spec}"
        )));
    }
    let cutoff = fu - 40.0;
    let walk = |dir: f64| -> Result<f64> {
        let mut v = u;
        for _ in 0..2000 {
            v += dir;
            if f(v)? < cutoff {
                return Ok(v + dir);
            }
        }
        Err(Error::Quadrature(format!(
            "Laplace integrand does not decay for {spec}"
        )))
    };
    let (lo, hi) = (walk(-1.0)?, walk(1.0)?);

    let mut first_err = None;
    let integrand = |v: f64| match f(v) {
        Ok(lv) => (lv - fu).exp(),
        Err(e) => {
            first_err.get_or_insert(e);
            0.0
        }
    };
    let r = integrate(integrand, &panels(lo, hi, 1.0), QuadOptions::rel(1e-9))?;
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(DeltaEstimate::exact(
        r.value * fu.exp(),
        DeltaMethod::LaplaceQuadrature,
        n,
        gamma,
    ))
}

/// `E|Y/σ|^p n^{1-p/2}`; `γ` in the estimate is `p/2`.
pub fn asym_fin3(spec: &DistributionSpec, n: usize, p: f64) -> Result<DeltaEstimate> {
    if !(p > 2.0 && p <= 3.0) {
        return Err(Error::Precondition(format!(
            "moment order p must lie in (2, 3], got {p}"
        )));
    }
    let law = spec.to_string();
    let sigma2 = match spec.second_moment()? {
        ExtReal::Finite(v) if v > 0.0 => v,
        ExtReal::Finite(_) => return Err(Error::DegenerateSample(crate::error::Side::Y)),
        ExtReal::Infinite => return Err(Error::InfiniteVariance { law }),
    };
    let mp = match spec.abs_moment(p)? {
        ExtReal::Finite(v) => v,
        ExtReal::Infinite => return Err(Error::InfiniteMoment { law, p }),
    };
    let nf = n as f64;
    let mut est = DeltaEstimate::exact(
        mp / sigma2.powf(0.5 * p) * nf.powf(1.0 - 0.5 * p),
        DeltaMethod::AsymptoticFin3,
        n,
        0.5 * p,
    );
    est.rescaled = (sigma2 - 1.0).abs() > 1e-12;
    Ok(est)
}

/// `Γ(γ-α)Γ(1+α) / (σ^{2α} Γ(γ)) · n^{1-α} ℓ(n)` for a `Y²` tail
/// `ℓ(x) x^-α` with `1 <= α < 2` and finite `σ² = EY²`.
///
/// The power `σ^{2α}` (rather than `σ²`) makes the expression invariant
/// under `Y -> cY`, as Δ itself is; the two agree at `α = 1`.
pub fn asym_fin(spec: &DistributionSpec, n: usize, gamma: f64) -> Result<DeltaEstimate> {
    let tail = spec.tail_model_for(TailTarget::Square)?;
    let alpha = tail.alpha;
    if !(1.0..2.0).contains(&alpha) {
        return Err(Error::Precondition(format!(
            "the finite-variance tail asymptotic needs 1 <= α < 2, got α = {alpha} for {spec}"
        )));
    }
    if !(gamma > alpha) {
        return Err(Error::Precondition(format!(
            "the finite-variance tail asymptotic requires γ > α: γ={gamma}, α={alpha}"
        )));
    }
    let sigma2 = match spec.second_moment()? {
        ExtReal::Finite(v) => v,
        ExtReal::Infinite => return Err(Error::InfiniteVariance { law: spec.to_string() }),
    };
    let nf = n as f64;
    if !(nf >= tail.x0) {
        return Err(Error::Domain(format!(
            "n = {n} lies below the tail model's x0 = {}",
            tail.x0
        )));
    }
    let constant = gamma_fn(gamma - alpha)? * gamma_fn(1.0 + alpha)? / (sigma2.powf(alpha) * gamma_fn(gamma)?);
    Ok(DeltaEstimate::exact(
        constant * nf.powf(1.0 - alpha) * tail.ell(nf),
        DeltaMethod::AsymptoticFin,
        n,
        gamma,
    ))
}

/// Solve `a = n L(a)` for a tail model with `α = 1` and divergent `L`.
///
/// Plain fixed-point steps first (the map is a contraction with factor
/// about `ℓ(a)/L(a)`), damped if the residual grows, finished by Newton
/// steps on `a - n L(a)`.
pub fn solve_an(tail: &TailModel, n: usize) -> Result<AnSolution> {
    if tail.alpha != 1.0 || !tail.big_l_diverges() {
        return Err(Error::WrongRegime(format!(
            "a_n = n L(a_n) needs α = 1 and a divergent L (infinite variance); got α = {}",
            tail.alpha
        )));
    }
    let nf = n as f64;
    let start = nf.max(tail.x0);
    let l_start = tail.big_l(start)?;
    if !(nf * l_start >= tail.x0) || !(l_start > 0.0) {
        return Err(Error::WrongRegime(format!(
            "n = {n} is too small: n L(n) = {} lies below x0 = {}",
            nf * l_start,
            tail.x0
        )));
    }
    let resid = |a: f64| -> Result<f64> { Ok((a - nf * tail.big_l(a)?).abs() / a) };
    let mut a = start;
    let mut r = resid(a)?;
    let mut damped = false;
    for it in 1..=AN_MAX_ITER {
        if r <= AN_TOL {
            return Ok(AnSolution {
                n,
                a_n: a,
                residual: r,
                iterations: it - 1,
            });
        }
        let target = nf * tail.big_l(a)?;
        let mut next = if damped { 0.5 * (a + target) } else { target };
        if it > 3 {
            // Newton on F(a) = a - n L(a), F'(a) = 1 - n ℓ(a)/a
            let slope = 1.0 - nf * tail.ell(a) / a;
            if slope > 0.0 {
                let cand = a - (a - target) / slope;
                if cand >= tail.x0 && cand.is_finite() {
                    next = cand;
                }
            }
        }
        next = next.max(tail.x0);
        let rn = resid(next)?;
        if rn > r && !damped {
            damped = true;
            continue;
        }
        a = next;
        r = rn;
    }
    if r <= AN_TOL {
        return Ok(AnSolution {
            n,
            a_n: a,
            residual: r,
            iterations: AN_MAX_ITER,
        });
    }
    Err(Error::IterationBudget(AN_MAX_ITER))
}

/// `ℓ(a_n) / ((γ-1) L(a_n))` for a `Y²` tail with `α = 1` and `EY² = ∞`.
pub fn asym_inf(spec: &DistributionSpec, n: usize, gamma: f64) -> Result<DeltaEstimate> {
    check_gamma(gamma, 1.0, true)?;
    if spec.second_moment()?.is_finite() {
        return Err(Error::WrongRegime(format!(
            "the infinite-variance asymptotic needs EY² = ∞, but {spec} has finite variance"
        )));
    }
    let tail = spec.tail_model_for(TailTarget::Square)?;
    let sol = solve_an(&tail, n)?;
    Ok(DeltaEstimate::exact(
        ratio_value(&tail, sol.a_n, gamma)?,
        DeltaMethod::AsymptoticInf,
        n,
        gamma,
    ))
}

fn ratio_value(tail: &TailModel, a: f64, gamma: f64) -> Result<f64> {
    Ok(tail.ell(a) / ((gamma - 1.0) * tail.big_l(a)?))
}

/// The first asymptotic whose preconditions hold, tried in the order
/// fin3, fin, inf, stable. The error lists why each one was rejected.
pub fn asym_auto(spec: &DistributionSpec, n: usize, gamma: f64) -> Result<DeltaEstimate> {
    let attempts = [
        asym_fin3(spec, n, 2.0 * gamma),
        asym_fin(spec, n, gamma),
        asym_inf(spec, n, gamma),
        asym_stable(spec, gamma),
    ];
    let mut why = Vec::new();
    for a in attempts {
        match a {
            Ok(est) => return Ok(est),
            Err(e) => why.push(e.to_string()),
        }
    }
    Err(Error::Precondition(format!(
        "no asymptotic applies to {spec}: {}",
        why.join("; ")
    )))
}

/// `Γ(γ - α/2) / (Γ(γ) Γ(1 - α/2))` for `0 < α < 2`, `γ > α/2`.
pub fn stable_limit(alpha: f64, gamma: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Precondition(format!(
            "the stable limit needs 0 < α < 2, got {alpha}"
        )));
    }
    if !(gamma > 0.5 * alpha) {
        return Err(Error::Precondition(format!(
            "the stable limit needs γ > α/2, got γ={gamma}, α={alpha}"
        )));
    }
    let ln = ln_gamma(gamma - 0.5 * alpha)? - ln_gamma(gamma)? - ln_gamma(1.0 - 0.5 * alpha)?;
    Ok(ln.exp())
}

/// The n-free limit of `Σ E|δ_k|^{2γ}` under a `|Y|` tail of index `α`.
pub fn asym_stable(spec: &DistributionSpec, gamma: f64) -> Result<DeltaEstimate> {
    let tail = spec.tail_model_for(TailTarget::Abs)?;
    Ok(DeltaEstimate::exact(
        stable_limit(tail.alpha, gamma)?,
        DeltaMethod::AsymptoticStable,
        0,
        gamma,
    ))
}

/// `stable_limit(2 - ε, 3/2) / ε`; tends to 1 as `ε -> 0`, so the
/// Kolmogorov bound is about `0.56 ξ₃ ε` near the normal domain.
pub fn stable_epsilon_factor(eps: f64) -> Result<f64> {
    Ok(stable_limit(2.0 - eps, 1.5)? / eps)
}
