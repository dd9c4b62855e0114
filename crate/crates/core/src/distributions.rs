//! Closed catalogue of laws for the X and Y sequences.
//!
//! Every law can be sampled. Where it makes sense a law also exposes exact
//! absolute moments, a regularly varying tail model for `Y²` or `|Y|`, and the
//! Laplace functionals
//!
//! ```text
//! φ₁(s) = E exp(-s Y²)        φ₂(s; γ) = E (Y²)^γ exp(-s Y²)
//! ```
//!
//! which drive the exact finite-n identity in `delta_engine`.
//!
//! The heavy-tailed kinds are parameterized through the survival function of
//! `W = Y²`. A tail `P(|Y|^p > x) ~ ℓ(x)/x^β` maps to `P(W > x) ~ ℓ(x^{p/2})/x^{pβ/2}`,
//! so `LogPareto2Sq` corresponds to `P(|Y| > x) ~ c/(4 x² log² x)`.

use std::cmp::Ordering;
use std::f64::consts::{E, FRAC_2_PI, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy as CauchyDist, Distribution, StandardNormal, StudentT as StudentTDist};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, panels, QuadOptions};
use crate::rng::SeededStream;
use crate::specfun::{ln_gamma, mills_ratio, normal_sf};

/// Relative accuracy requested from every inner quadrature in this module.
const QUAD_REL: f64 = 1e-12;
/// Lower end of log-space integrals for laws whose `Y²` density reaches 0.
const V_FLOOR: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Normal01,
    Rademacher,
    /// `P(Y² > x) = x^-α` for `x >= 1`.
    ParetoSq {
        alpha: f64,
        symmetric: bool,
    },
    /// `P(Y² > x) = c / (x log² x)` for `x >= x0`, `c = x0 log² x0`.
    LogPareto2Sq {
        x0: f64,
        symmetric: bool,
    },
    /// `P(Y² > x) = c / (x log x)` for `x >= x0`, `c = x0 log x0`.
    LogPareto1Sq {
        x0: f64,
        symmetric: bool,
    },
    Cauchy,
    StudentT {
        nu: f64,
    },
    PointMass {
        c: f64,
    },
}

/// Which analytic facilities a law supports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capabilities {
    /// Supremum of `p` with `E|Y|^p < ∞`.
    pub moment_sup: ExtReal,
    /// Whether `E|Y|^p` is still finite at `p = moment_sup`.
    pub moment_at_sup: bool,
    pub tail_square: bool,
    pub tail_abs: bool,
    pub laplace: bool,
    pub laplace_tail_form: bool,
    pub symmetric: bool,
}

/// Extended non-negative real: moments are either finite or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    /// `f64::INFINITY` for the infinite value.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl Eq for ExtReal {}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.total_cmp(b),
            (ExtReal::Finite(_), ExtReal::Infinite) => Ordering::Less,
            (ExtReal::Infinite, ExtReal::Finite(_)) => Ordering::Greater,
            (ExtReal::Infinite, ExtReal::Infinite) => Ordering::Equal,
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

/// Moments of a standardized X-law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XMoments {
    /// `E|X|³`
    pub xi3: f64,
    /// `E X⁴`
    pub m4: f64,
    /// `E(X² - 1)² = m4 - 1`
    pub kappa4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailTarget {
    /// Tail of `Y²`.
    Square,
    /// Tail of `|Y|`.
    Abs,
}

/// The slowly varying factor of a tail model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlowlyVarying {
    Constant(f64),
    /// `c / (log x)^k`
    InvLogPow {
        c: f64,
        k: f64,
    },
    /// `x P(|C| > x)` for standard Cauchy `C`.
    CauchyAbs,
    /// `√x P(C² > x)`.
    CauchySquare,
    /// `x^ν P(|T| > x)` for Student t.
    StudentTAbs {
        nu: f64,
    },
    /// `x^{ν/2} P(T² > x)`.
    StudentTSquare {
        nu: f64,
    },
}

/// `P(target > x) = ℓ(x) x^-α` for `x >= x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub alpha: f64,
    pub target: TailTarget,
    pub x0: f64,
    pub ell: SlowlyVarying,
    /// `∫₀^{x0} t^{α-1} P(target > t) dt`. With `α = 1` this makes
    /// [`TailModel::big_l`] the truncated mean `E min(target, x)`.
    pub l_offset: f64,
}

impl TailModel {
    /// A bare model with no mass below `x0` accounted for.
    pub fn new(alpha: f64, target: TailTarget, x0: f64, ell: SlowlyVarying) -> Self {
        Self {
            alpha,
            target,
            x0,
            ell,
            l_offset: 0.0,
        }
    }

    pub fn ell(&self, x: f64) -> f64 {
        match self.ell {
            SlowlyVarying::Constant(c) => c,
            SlowlyVarying::InvLogPow { c, k } => c / x.ln().powf(k),
            SlowlyVarying::CauchyAbs => x * FRAC_2_PI * x.recip().atan(),
            SlowlyVarying::CauchySquare => {
                let r = x.sqrt();
                r * FRAC_2_PI * r.recip().atan()
            }
            SlowlyVarying::StudentTAbs { nu } => x.powf(nu) * student_t_two_sided_sf(nu, x),
            SlowlyVarying::StudentTSquare { nu } => x.powf(0.5 * nu) * student_t_two_sided_sf(nu, x.sqrt()),
        }
    }

    /// Modeled survival `ℓ(x) x^-α`.
    pub fn survival(&self, x: f64) -> f64 {
        self.ell(x) * x.powf(-self.alpha)
    }

    /// `L(x) = l_offset + ∫_{x0}^x ℓ(t)/t dt` for `x >= x0`.
    pub fn big_l(&self, x: f64) -> Result<f64> {
        if !(x >= self.x0) {
            return Err(Error::Domain(format!("L(x) needs x >= x0 = {}, got {x}", self.x0)));
        }
        let tail = match self.ell {
            SlowlyVarying::Constant(c) => c * (x / self.x0).ln(),
            SlowlyVarying::InvLogPow { c, k } => {
                let (a, b) = (self.x0.ln(), x.ln());
                if (k - 1.0).abs() < 1e-15 {
                    c * (b.ln() - a.ln())
                } else {
                    c * (b.powf(1.0 - k) - a.powf(1.0 - k)) / (1.0 - k)
                }
            }
            _ => self.big_l_tail_numeric(x)?,
        };
        Ok(self.l_offset + tail)
    }

    /// `∫_{x0}^x ℓ(t)/t dt` by quadrature in `log t`.
    pub fn big_l_tail_numeric(&self, x: f64) -> Result<f64> {
        let (a, b) = (self.x0.ln(), x.ln());
        if b <= a {
            return Ok(0.0);
        }
        let pts = panels(a, b, 2.0);
        Ok(integrate(|u: f64| self.ell(u.exp()), &pts, QuadOptions::rel(QUAD_REL))?.value)
    }

    /// Whether `L(x) → ∞`, i.e. `∫ ℓ(t)/t dt` diverges.
    pub fn big_l_diverges(&self) -> bool {
        match self.ell {
            SlowlyVarying::InvLogPow { k, .. } => k <= 1.0,
            _ => true,
        }
    }
}

impl DistributionSpec {
    pub fn pareto_sq(alpha: f64) -> Self {
        DistributionSpec::ParetoSq { alpha, symmetric: true }
    }

    pub fn log_pareto2() -> Self {
        DistributionSpec::LogPareto2Sq {
            x0: E * E,
            symmetric: true,
        }
    }

    pub fn log_pareto1() -> Self {
        DistributionSpec::LogPareto1Sq { x0: E, symmetric: true }
    }

    /// Reject parameters outside the law's domain.
    pub fn validate(&self) -> Result<()> {
        use DistributionSpec::*;
        let bad = |msg: String| Err(Error::Catalogue(msg));
        match *self {
            ParetoSq { alpha, .. } if !(alpha > 0.0 && alpha.is_finite()) => {
                bad(format!("pareto_sq needs alpha > 0, got {alpha}"))
            }
            LogPareto2Sq { x0, .. } | LogPareto1Sq { x0, .. } if !(x0 >= E && x0.is_finite()) => {
                bad(format!("log-Pareto laws need x0 >= e, got {x0}"))
            }
            StudentT { nu } if !(nu > 0.0 && nu.is_finite()) => bad(format!("t needs nu > 0, got {nu}")),
            PointMass { c } if !c.is_finite() => bad(format!("pointmass needs finite c, got {c}")),
            _ => Ok(()),
        }
    }

    /// Constant `c` of the survival function of `Y²` (1 where not applicable).
    pub fn normalization(&self) -> f64 {
        match *self {
            DistributionSpec::LogPareto2Sq { x0, .. } => x0 * x0.ln().powi(2),
            DistributionSpec::LogPareto1Sq { x0, .. } => x0 * x0.ln(),
            _ => 1.0,
        }
    }

    /// Tail index of `Y²` for the power-law kinds.
    pub fn alpha(&self) -> Option<f64> {
        match *self {
            DistributionSpec::ParetoSq { alpha, .. } => Some(alpha),
            DistributionSpec::LogPareto2Sq { .. } | DistributionSpec::LogPareto1Sq { .. } => Some(1.0),
            DistributionSpec::Cauchy => Some(0.5),
            DistributionSpec::StudentT { nu } => Some(0.5 * nu),
            _ => None,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match *self {
            DistributionSpec::ParetoSq { symmetric, .. }
            | DistributionSpec::LogPareto2Sq { symmetric, .. }
            | DistributionSpec::LogPareto1Sq { symmetric, .. } => symmetric,
            DistributionSpec::PointMass { c } => c == 0.0,
            _ => true,
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        use DistributionSpec::*;
        let (moment_sup, moment_at_sup) = match *self {
            Normal01 | Rademacher | PointMass { .. } => (ExtReal::Infinite, true),
            ParetoSq { alpha, .. } => (ExtReal::Finite(2.0 * alpha), false),
            LogPareto2Sq { .. } => (ExtReal::Finite(2.0), true),
            LogPareto1Sq { .. } => (ExtReal::Finite(2.0), false),
            Cauchy => (ExtReal::Finite(1.0), false),
            StudentT { nu } => (ExtReal::Finite(nu), false),
        };
        let heavy = !matches!(self, Normal01 | Rademacher | PointMass { .. });
        Capabilities {
            moment_sup,
            moment_at_sup,
            tail_square: heavy,
            tail_abs: heavy,
            laplace: true,
            laplace_tail_form: !matches!(self, StudentT { .. }),
            symmetric: self.is_symmetric(),
        }
    }

    /// Draw one value.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DistributionSpec::Normal01 => rng.sample(StandardNormal),
            DistributionSpec::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            DistributionSpec::ParetoSq { alpha, symmetric } => {
                let sign = sign_draw(rng, symmetric);
                sign * open_unit(rng).powf(-0.5 / alpha)
            }
            DistributionSpec::LogPareto2Sq { x0, symmetric } => {
                let sign = sign_draw(rng, symmetric);
                sign * log_pareto_inverse(x0, 2, open_unit(rng)).sqrt()
            }
            DistributionSpec::LogPareto1Sq { x0, symmetric } => {
                let sign = sign_draw(rng, symmetric);
                sign * log_pareto_inverse(x0, 1, open_unit(rng)).sqrt()
            }
            DistributionSpec::Cauchy => CauchyDist::new(0.0, 1.0).expect("unit scale").sample(rng),
            DistributionSpec::StudentT { nu } => StudentTDist::new(nu).expect("validated nu").sample(rng),
            DistributionSpec::PointMass { c } => c,
        }
    }

    /// Fill `out` with i.i.d. draws.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.draw(rng);
        }
    }

    /// `E|Y|^p` for `p >= 1`, `+∞` where it diverges.
    pub fn abs_moment(&self, p: f64) -> Result<ExtReal> {
        if !(p >= 1.0) || p.is_nan() {
            return Err(Error::Domain(format!("abs_moment needs p >= 1, got {p}")));
        }
        self.validate()?;
        let fin = |v: f64| Ok(ExtReal::Finite(v));
        match *self {
            DistributionSpec::Normal01 => fin((0.5 * p * 2f64.ln() + ln_gamma(0.5 * (p + 1.0))? - 0.5 * PI.ln()).exp()),
            DistributionSpec::Rademacher => fin(1.0),
            DistributionSpec::PointMass { c } => fin(c.abs().powf(p)),
            DistributionSpec::ParetoSq { alpha, .. } => {
                let q = 0.5 * p;
                if q < alpha {
                    fin(alpha / (alpha - q))
                } else {
                    Ok(ExtReal::Infinite)
                }
            }
            DistributionSpec::LogPareto2Sq { x0, .. } => log_pareto_moment(x0, 2, 0.5 * p),
            DistributionSpec::LogPareto1Sq { x0, .. } => log_pareto_moment(x0, 1, 0.5 * p),
            DistributionSpec::Cauchy => Ok(ExtReal::Infinite),
            DistributionSpec::StudentT { nu } => {
                if p >= nu {
                    return Ok(ExtReal::Infinite);
                }
                let ln = 0.5 * p * nu.ln() + ln_gamma(0.5 * (p + 1.0))? + ln_gamma(0.5 * (nu - p))?
                    - 0.5 * PI.ln()
                    - ln_gamma(0.5 * nu)?;
                fin(ln.exp())
            }
        }
    }

    /// `E Y²`, possibly infinite.
    pub fn second_moment(&self) -> Result<ExtReal> {
        self.abs_moment(2.0)
    }

    /// `ξ₃`, `m₄`, `κ₄` for a mean-zero, unit-variance X-law.
    pub fn x_moments(&self) -> Result<XMoments> {
        let unit_variance = matches!(self.second_moment()?, ExtReal::Finite(v) if (v - 1.0).abs() < 1e-12);
        let standardized = self.is_symmetric() && unit_variance;
        if !standardized {
            return Err(Error::Unsupported {
                law: self.to_string(),
                what: "X moments (law is not mean zero with unit variance)".into(),
            });
        }
        let xi3 = self.abs_moment(3.0)?;
        let m4 = self.abs_moment(4.0)?;
        match (xi3, m4) {
            (ExtReal::Finite(xi3), ExtReal::Finite(m4)) => Ok(XMoments {
                xi3,
                m4,
                kappa4: m4 - 1.0,
            }),
            _ => Err(Error::InfiniteMoment {
                law: self.to_string(),
                p: 4.0,
            }),
        }
    }

    /// Tail model for the law's natural target: `Y²` for the squared
    /// families, `|Y|` for Cauchy and Student t.
    pub fn tail_model(&self) -> Result<TailModel> {
        let target = match self {
            DistributionSpec::Cauchy | DistributionSpec::StudentT { .. } => TailTarget::Abs,
            _ => TailTarget::Square,
        };
        self.tail_model_for(target)
    }

    pub fn tail_model_for(&self, target: TailTarget) -> Result<TailModel> {
        self.validate()?;
        use TailTarget::*;
        let model = |alpha, x0, ell, l_offset| {
            Ok(TailModel {
                alpha,
                target,
                x0,
                ell,
                l_offset,
            })
        };
        match (*self, target) {
            (DistributionSpec::ParetoSq { alpha, .. }, Square) => {
                model(alpha, 1.0, SlowlyVarying::Constant(1.0), 1.0 / alpha)
            }
            (DistributionSpec::ParetoSq { alpha, .. }, Abs) => {
                model(2.0 * alpha, 1.0, SlowlyVarying::Constant(1.0), 0.5 / alpha)
            }
            (DistributionSpec::LogPareto2Sq { x0, .. }, Square) => {
                let c = self.normalization();
                model(1.0, x0, SlowlyVarying::InvLogPow { c, k: 2.0 }, x0)
            }
            (DistributionSpec::LogPareto2Sq { x0, .. }, Abs) => {
                let c = self.normalization() / 4.0;
                model(2.0, x0.sqrt(), SlowlyVarying::InvLogPow { c, k: 2.0 }, 0.5 * x0)
            }
            (DistributionSpec::LogPareto1Sq { x0, .. }, Square) => {
                let c = self.normalization();
                model(1.0, x0, SlowlyVarying::InvLogPow { c, k: 1.0 }, x0)
            }
            (DistributionSpec::LogPareto1Sq { x0, .. }, Abs) => {
                let c = self.normalization() / 2.0;
                model(2.0, x0.sqrt(), SlowlyVarying::InvLogPow { c, k: 1.0 }, 0.5 * x0)
            }
            (DistributionSpec::Cauchy, Abs) => {
                // E min(|C|, 1) = 1/2 + log(2)/π
                model(1.0, 1.0, SlowlyVarying::CauchyAbs, 0.5 + 2f64.ln() / PI)
            }
            (DistributionSpec::Cauchy, Square) => {
                let l0 = offset_numeric(0.5, |t| FRAC_2_PI * t.sqrt().recip().atan())?;
                model(0.5, 1.0, SlowlyVarying::CauchySquare, l0)
            }
            (DistributionSpec::StudentT { nu }, Abs) => {
                let l0 = offset_numeric(nu, |t| student_t_two_sided_sf(nu, t))?;
                model(nu, 1.0, SlowlyVarying::StudentTAbs { nu }, l0)
            }
            (DistributionSpec::StudentT { nu }, Square) => {
                let l0 = offset_numeric(0.5 * nu, |t| student_t_two_sided_sf(nu, t.sqrt()))?;
                model(0.5 * nu, 1.0, SlowlyVarying::StudentTSquare { nu }, l0)
            }
            _ => Err(Error::NoTailModel { law: self.to_string() }),
        }
    }

    /// Survival function of `W = Y²`.
    pub fn survival_sq(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            DistributionSpec::Normal01 => 2.0 * normal_sf(x.max(0.0).sqrt()),
            DistributionSpec::Rademacher => step_survival(1.0, x),
            DistributionSpec::PointMass { c } => step_survival(c * c, x),
            DistributionSpec::ParetoSq { alpha, .. } => {
                if x < 1.0 {
                    1.0
                } else {
                    x.powf(-alpha)
                }
            }
            DistributionSpec::LogPareto2Sq { x0, .. } | DistributionSpec::LogPareto1Sq { x0, .. } => {
                if x < x0 {
                    1.0
                } else {
                    self.normalization() / (x * x.ln().powi(self.log_power()))
                }
            }
            DistributionSpec::Cauchy => {
                if x <= 0.0 {
                    1.0
                } else {
                    FRAC_2_PI * x.sqrt().recip().atan()
                }
            }
            DistributionSpec::StudentT { nu } => student_t_two_sided_sf(nu, x.max(0.0).sqrt()),
        })
    }

    fn log_power(&self) -> i32 {
        match self {
            DistributionSpec::LogPareto2Sq { .. } => 2,
            _ => 1,
        }
    }

    /// `log(f_W(e^v) e^v)`: log-density of `log W`. `None` for atoms.
    fn log_density_logw(&self, v: f64) -> Option<f64> {
        match *self {
            DistributionSpec::Normal01 => Some(0.5 * v - 0.5 * v.exp() - 0.5 * (2.0 * PI).ln()),
            DistributionSpec::ParetoSq { alpha, .. } => Some(if v < 0.0 {
                f64::NEG_INFINITY
            } else {
                alpha.ln() - alpha * v
            }),
            DistributionSpec::LogPareto2Sq { x0, .. } | DistributionSpec::LogPareto1Sq { x0, .. } => {
                if v < x0.ln() {
                    return Some(f64::NEG_INFINITY);
                }
                let k = self.log_power() as f64;
                Some(self.normalization().ln() + (v + k).ln() - v - (k + 1.0) * v.ln())
            }
            DistributionSpec::Cauchy => Some(0.5 * v - PI.ln() - softplus(v)),
            DistributionSpec::StudentT { nu } => Some(
                ln_gamma(0.5 * (nu + 1.0)).ok()? - ln_gamma(0.5 * nu).ok()? - 0.5 * (nu * PI).ln() + 0.5 * v
                    - 0.5 * (nu + 1.0) * (v.exp() / nu).ln_1p(),
            ),
            DistributionSpec::Rademacher | DistributionSpec::PointMass { .. } => None,
        }
    }

    /// Left end of the support of `log W` (`V_FLOOR` when it is unbounded).
    fn logw_floor(&self) -> f64 {
        match *self {
            DistributionSpec::ParetoSq { .. } => 0.0,
            DistributionSpec::LogPareto2Sq { x0, .. } | DistributionSpec::LogPareto1Sq { x0, .. } => x0.ln(),
            _ => V_FLOOR,
        }
    }

    /// Value of the atom of `W`, for the degenerate kinds.
    fn atom(&self) -> Option<f64> {
        match *self {
            DistributionSpec::Rademacher => Some(1.0),
            DistributionSpec::PointMass { c } => Some(c * c),
            _ => None,
        }
    }
}

fn step_survival(at: f64, x: f64) -> f64 {
    if x < at {
        1.0
    } else {
        0.0
    }
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn sign_draw<R: Rng + ?Sized>(rng: &mut R, symmetric: bool) -> f64 {
    if symmetric && rng.random::<bool>() {
        -1.0
    } else {
        1.0
    }
}

/// Uniform on (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Solve `c / (x log^k x) = u` for `x >= x0`, `c = x0 log^k x0`.
///
/// Works in `w = log x`, where `h(w) = log c - w - k log w - log u` is
/// decreasing. The root is bracketed by `[log x0, log(c/u)]`; Newton steps
/// that leave the bracket fall back to bisection.
pub fn log_pareto_inverse(x0: f64, k: i32, u: f64) -> f64 {
    let kf = k as f64;
    let w0 = x0.ln();
    let ln_c = x0.ln() + kf * w0.ln();
    let target = ln_c - u.ln();
    let h = |w: f64| target - w - kf * w.ln();
    let (mut lo, mut hi) = (w0, target.max(w0));
    if u >= 1.0 || h(lo) <= 0.0 {
        return x0;
    }
    let w1 = (target - kf * target.ln()).max(w0);
    let mut w = (target - kf * w1.ln()).clamp(lo, hi);
    for _ in 0..100 {
        let hw = h(w);
        if hw > 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let step = hw / (1.0 + kf / w);
        // Newton error after this step is about k step² / (2w²), already
        // below an ulp of w
        if step.abs() <= 1e-7 * w {
            w += step;
            break;
        }
        let next = w + step;
        w = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    w.exp().max(x0)
}

/// `E W^q` for the log-Pareto law of `W` with log power `k`.
///
/// `E W^q = x0^q + q c ∫_{w0}^∞ e^{(q-1)v} v^{-k} dv`; the integral runs in
/// `v = w0 e^u` so the slow polynomial decay near `q = 1` stays cheap.
fn log_pareto_moment(x0: f64, k: i32, q: f64) -> Result<ExtReal> {
    let kf = k as f64;
    let w0 = x0.ln();
    let c = x0 * w0.powi(k);
    if q > 1.0 || (q == 1.0 && k <= 1) {
        return Ok(ExtReal::Infinite);
    }
    if q == 1.0 {
        // ∫ v^-k dv = w0^{1-k}/(k-1)
        return Ok(ExtReal::Finite(x0 + c * w0.powf(1.0 - kf) / (kf - 1.0)));
    }
    let rate = 1.0 - q;
    let v_hi = w0 + 45.0 / rate;
    let u_hi = (v_hi / w0).ln();
    let pts = panels(0.0, u_hi, 0.5);
    let integral = integrate(
        |u: f64| {
            let v = w0 * u.exp();
            (-rate * v).exp() * v.powf(1.0 - kf)
        },
        &pts,
        QuadOptions::rel(QUAD_REL),
    )?
    .value;
    Ok(ExtReal::Finite(x0.powf(q) + q * c * integral))
}

/// `P(|T| > x)` for Student t with `nu` degrees of freedom, by quadrature of
/// the density in `log t`.
pub fn student_t_two_sided_sf(nu: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_norm =
        ln_gamma(0.5 * (nu + 1.0)).unwrap_or(f64::NAN) - ln_gamma(0.5 * nu).unwrap_or(f64::NAN) - 0.5 * (nu * PI).ln()
            + 2f64.ln();
    let f = |v: f64| {
        let t = v.exp();
        (ln_norm + v - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()).exp()
    };
    let a = x.ln();
    let b = a.max(0.5 * nu.ln()) + 90.0 / nu;
    let pts = panels(a, b, 1.0);
    integrate(f, &pts, QuadOptions::rel(QUAD_REL))
        .map(|r| r.value.min(1.0))
        .unwrap_or(f64::NAN)
}

/// `∫₀^1 t^{α-1} S(t) dt` for tail models anchored at `x0 = 1`.
fn offset_numeric(alpha: f64, sf: impl Fn(f64) -> f64) -> Result<f64> {
    // substitute t = e^v; the integrand decays like e^{αv} as v → -∞
    let lo = -60.0 / alpha;
    let pts = panels(lo, 0.0, 1.0);
    Ok(integrate(
        |v: f64| (alpha * v).exp() * sf(v.exp()),
        &pts,
        QuadOptions::rel(QUAD_REL),
    )?
    .value)
}

/// `n` i.i.d. draws from `spec`, reproducible in `stream`.
pub fn sample(spec: &DistributionSpec, n: usize, stream: SeededStream) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    spec.validate()?;
    let mut rng: ChaCha8Rng = stream.rng();
    let mut out = vec![0.0; n];
    spec.fill(&mut rng, &mut out);
    Ok(out)
}

pub fn abs_moment(spec: &DistributionSpec, p: f64) -> Result<ExtReal> {
    spec.abs_moment(p)
}

pub fn tail_model(spec: &DistributionSpec) -> Result<TailModel> {
    spec.tail_model()
}

// ---------------------------------------------------------------------------
// Laplace functionals of W = Y²

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "Laplace argument must be positive and finite, got {s}"
        )))
    }
}

/// Upper end (in `log x`) beyond which `x^γ e^{-sx}` is below e^-45 of its
/// value at the support start.
fn logw_ceiling(spec: &DistributionSpec, s: f64, gamma: f64) -> f64 {
    let start = match spec.logw_floor() {
        f if f > V_FLOOR => f.exp(),
        _ => 0.0,
    };
    (start + (50.0 + 10.0 * gamma) / s).ln()
}

/// `∫ g(v) exp(log_density(v)) dv` over the support of `log W`, up to `v_hi`.
fn density_integral(spec: &DistributionSpec, v_hi: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let v_lo = spec.logw_floor();
    if v_hi <= v_lo {
        return Ok(0.0);
    }
    let width = ((v_hi - v_lo) / 48.0).max(1.0);
    let pts = panels(v_lo, v_hi, width);
    let f = |v: f64| {
        let ld = spec.log_density_logw(v).unwrap_or(f64::NEG_INFINITY);
        if ld == f64::NEG_INFINITY {
            0.0
        } else {
            g(v) * ld.exp()
        }
    };
    Ok(integrate(f, &pts, QuadOptions::rel(QUAD_REL))?.value)
}

/// `φ₁(s) = E e^{-sW}`.
pub fn laplace_phi1(spec: &DistributionSpec, s: f64) -> Result<f64> {
    check_s(s)?;
    spec.validate()?;
    if let Some(a) = spec.atom() {
        return Ok((-s * a).exp());
    }
    match spec {
        DistributionSpec::Normal01 => Ok((1.0 + 2.0 * s).powf(-0.5)),
        DistributionSpec::Cauchy => Ok(cauchy_phi1(s)),
        _ => {
            let v_hi = logw_ceiling(spec, s, 0.0);
            density_integral(spec, v_hi, |v| (-s * v.exp()).exp())
        }
    }
}

/// `1 - φ₁(s) = E(1 - e^{-sW})`, computed without cancellation.
pub fn laplace_one_minus_phi1(spec: &DistributionSpec, s: f64) -> Result<f64> {
    check_s(s)?;
    spec.validate()?;
    if let Some(a) = spec.atom() {
        return Ok(-(-s * a).exp_m1());
    }
    match spec {
        DistributionSpec::Normal01 => Ok(-(-0.5 * (2.0 * s).ln_1p()).exp_m1()),
        DistributionSpec::Cauchy => Ok(cauchy_one_minus_phi1(s)),
        _ => {
            // past X = 50/s the factor 1 - e^{-sx} is 1 to within e^-50,
            // so the remainder is the survival function at X
            let v_hi = logw_ceiling(spec, s, 0.0);
            let body = density_integral(spec, v_hi, |v| -(-s * v.exp()).exp_m1())?;
            Ok(body + spec.survival_sq(v_hi.exp())?)
        }
    }
}

/// `φ₂(s; γ) = E W^γ e^{-sW}` by direct integration against the density.
pub fn laplace_phi2(spec: &DistributionSpec, s: f64, gamma: f64) -> Result<f64> {
    check_s(s)?;
    spec.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("φ₂ needs γ > 0, got {gamma}")));
    }
    if let Some(a) = spec.atom() {
        return Ok(if a == 0.0 { 0.0 } else { a.powf(gamma) * (-s * a).exp() });
    }
    match spec {
        DistributionSpec::Normal01 => {
            // E W^γ e^{-sW} for W ~ χ²₁
            let ln = gamma * 2f64.ln() + ln_gamma(gamma + 0.5)? - 0.5 * PI.ln() - (gamma + 0.5) * (2.0 * s).ln_1p();
            Ok(ln.exp())
        }
        _ => {
            let v_hi = logw_ceiling(spec, s, gamma);
            density_integral(spec, v_hi, |v| (gamma * v - s * v.exp()).exp())
        }
    }
}

/// `φ₂` through the survival function:
/// `γ∫x^{γ-1}S(x)e^{-sx}dx - s∫x^γ S(x)e^{-sx}dx`.
pub fn laplace_phi2_tail_form(spec: &DistributionSpec, s: f64, gamma: f64) -> Result<f64> {
    check_s(s)?;
    spec.validate()?;
    if !spec.capabilities().laplace_tail_form {
        return Err(Error::Unsupported {
            law: spec.to_string(),
            what: "tail-form Laplace functional".into(),
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("φ₂ needs γ > 0, got {gamma}")));
    }
    // Below the support start x_s the survival function is 1 and the
    // integrand is exactly g'(x) for g(x) = x^γ e^{-sx}, contributing g(x_s).
    let g = |x: f64| if x == 0.0 { 0.0 } else { (gamma * x.ln() - s * x).exp() };
    if let Some(a) = spec.atom() {
        return Ok(g(a));
    }
    let floor = spec.logw_floor();
    let (head, v_lo) = if floor > V_FLOOR {
        (g(floor.exp()), floor)
    } else {
        (0.0, V_FLOOR / gamma.min(1.0))
    };
    let v_hi = logw_ceiling(spec, s, gamma);
    let pts = panels(v_lo, v_hi, ((v_hi - v_lo) / 48.0).max(1.0));
    let mut err = None;
    let f = |v: f64| {
        let x = v.exp();
        let sv = match spec.survival_sq(x) {
            Ok(sv) => sv,
            Err(e) => {
                err.get_or_insert(e);
                return 0.0;
            }
        };
        (gamma - s * x) * (gamma * v - s * x).exp() * sv
    };
    let body = integrate(f, &pts, QuadOptions::rel(QUAD_REL))?.value;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(head + body)
}

/// `e^s erfc(√s) = 2 e^s Q(√(2s))`, written via the Mills ratio so neither
/// factor overflows.
fn cauchy_phi1(s: f64) -> f64 {
    (2.0 / PI).sqrt() * mills_ratio((2.0 * s).sqrt())
}

fn cauchy_one_minus_phi1(s: f64) -> f64 {
    if s < 0.01 {
        // erfcx(z) = Σ_k (-z)^k / Γ(k/2 + 1)
        let z = s.sqrt();
        let mut sum = 0.0;
        let mut zk = 1.0;
        // Γ(k/2 + 1) for k = 0, 1 seeds the two-step recurrence
        let mut g = [1.0, 0.5 * PI.sqrt()];
        for k in 1..60 {
            zk *= -z;
            let gk = if k == 1 {
                g[1]
            } else {
                // Γ(k/2 + 1) = (k/2) Γ(k/2)
                let next = 0.5 * k as f64 * g[k % 2];
                g[k % 2] = next;
                next
            };
            let term = zk / gk;
            sum -= term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        1.0 - cauchy_phi1(s)
    }
}

// ---------------------------------------------------------------------------
// text form

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym = |symmetric: bool| if symmetric { "" } else { ",symmetric=false" };
        match *self {
            DistributionSpec::Normal01 => f.write_str("normal"),
            DistributionSpec::Rademacher => f.write_str("rademacher"),
            DistributionSpec::ParetoSq { alpha, symmetric } => {
                write!(f, "pareto_sq:alpha={alpha}{}", sym(symmetric))
            }
            DistributionSpec::LogPareto2Sq { x0, symmetric } => {
                f.write_str("logpareto2")?;
                let mut sep = ':';
                if x0 != E * E {
                    write!(f, "{sep}x0={x0}")?;
                    sep = ',';
                }
                if !symmetric {
                    write!(f, "{sep}symmetric=false")?;
                }
                Ok(())
            }
            DistributionSpec::LogPareto1Sq { x0, symmetric } => {
                f.write_str("logpareto1")?;
                let mut sep = ':';
                if x0 != E {
                    write!(f, "{sep}x0={x0}")?;
                    sep = ',';
                }
                if !symmetric {
                    write!(f, "{sep}symmetric=false")?;
                }
                Ok(())
            }
            DistributionSpec::Cauchy => f.write_str("cauchy"),
            DistributionSpec::StudentT { nu } => write!(f, "t:nu={nu}"),
            DistributionSpec::PointMass { c } => write!(f, "pointmass:c={c}"),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, params) = match text.split_once(':') {
            Some((n, p)) => (n.trim(), p.trim()),
            None => (text, ""),
        };
        let mut kv: Vec<(String, String)> = Vec::new();
        if !params.is_empty() {
            for item in params.split(',') {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Catalogue(format!("expected key=value in '{text}', got '{item}'")))?;
                let k = k.trim().to_ascii_lowercase();
                if kv.iter().any(|(seen, _)| *seen == k) {
                    return Err(Error::Catalogue(format!("duplicate parameter '{k}' in '{text}'")));
                }
                kv.push((k, v.trim().to_string()));
            }
        }
        let mut take = |key: &str| -> Option<String> {
            let pos = kv.iter().position(|(k, _)| k == key)?;
            Some(kv.remove(pos).1)
        };
        let num = |key: &str, v: Option<String>| -> Result<Option<f64>> {
            v.map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Catalogue(format!("parameter {key}='{s}' is not a number")))
            })
            .transpose()
        };
        let flag = |v: Option<String>| -> Result<bool> {
            match v.as_deref() {
                None | Some("true") => Ok(true),
                Some("false") => Ok(false),
                Some(other) => Err(Error::Catalogue(format!(
                    "symmetric must be true or false, got '{other}'"
                ))),
            }
        };
        let spec = match name.to_ascii_lowercase().as_str() {
            "normal" | "normal01" | "gaussian" => DistributionSpec::Normal01,
            "rademacher" => DistributionSpec::Rademacher,
            "pareto_sq" | "pareto" => {
                let alpha = num("alpha", take("alpha"))?
                    .ok_or_else(|| Error::Catalogue("pareto_sq needs alpha=<value>".into()))?;
                DistributionSpec::ParetoSq {
                    alpha,
                    symmetric: flag(take("symmetric"))?,
                }
            }
            "logpareto2" => DistributionSpec::LogPareto2Sq {
                x0: num("x0", take("x0"))?.unwrap_or(E * E),
                symmetric: flag(take("symmetric"))?,
            },
            "logpareto1" => DistributionSpec::LogPareto1Sq {
                x0: num("x0", take("x0"))?.unwrap_or(E),
                symmetric: flag(take("symmetric"))?,
            },
            "cauchy" => DistributionSpec::Cauchy,
            "t" | "student_t" => DistributionSpec::StudentT {
                nu: num("nu", take("nu"))?.ok_or_else(|| Error::Catalogue("t needs nu=<value>".into()))?,
            },
            "pointmass" => DistributionSpec::PointMass {
                c: num("c", take("c"))?.unwrap_or(1.0),
            },
            other => return Err(Error::Catalogue(format!("unknown distribution '{other}'"))),
        };
        if let Some((k, _)) = kv.first() {
            return Err(Error::Catalogue(format!("unknown parameter '{k}' for '{name}'")));
        }
        spec.validate()?;
        Ok(spec)
    }
}
