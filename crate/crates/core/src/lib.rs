//! Normal-approximation error of randomly weighted self-normalized sums
//! ψ_n = Σ X_i Y_i / V_n, V_n = (Σ Y_i²)^{1/2}.
//!
//! The crate computes the Berry–Esseen type bounds and the asymptotic
//! rates of Δ = Σ E|Y_k/V_n|³ in closed form, estimates the same
//! quantities by Monte Carlo and by an exact Laplace-transform quadrature,
//! and measures empirical Kolmogorov and Wasserstein distances to the
//! standard normal.
//!
//! The special functions, quadrature, statistics, distances, bounds and
//! rate fitting are generic over [`Real`] (`f32` or `f64`); the sampling,
//! Δ engine and experiment harness work in `f64`. Aliases for the `f64`
//! instantiations are re-exported below.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Quadrature tables and reference values keep their published digits.
#![allow(clippy::excessive_precision)]

pub mod bounds;
pub mod delta_engine;
pub mod distances;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod quadrature;
pub mod regression;
pub mod rng;
pub mod scalar;
pub mod specfun;
pub mod statistics;

pub use error::{Error, Result};
pub use rng::SeededStream;
pub use scalar::Real;

pub use delta_engine::{AnSolution, DeltaEstimate, DeltaMethod};
pub use distributions::{DistributionSpec, ExtReal, TailModel, TailTarget};
pub use harness::{ExperimentConfig, ExperimentRow};

pub type SamplePair64 = statistics::SamplePair<f64>;
pub type DeltaVector64 = statistics::DeltaVector<f64>;
pub type DistanceEstimate64 = distances::DistanceEstimate<f64>;
pub type BoundReport64 = bounds::BoundReport<f64>;
pub type RateFit64 = regression::RateFit<f64>;

pub type SamplePair32 = statistics::SamplePair<f32>;
pub type DeltaVector32 = statistics::DeltaVector<f32>;
pub type DistanceEstimate32 = distances::DistanceEstimate<f32>;
pub type BoundReport32 = bounds::BoundReport<f32>;
pub type RateFit32 = regression::RateFit<f32>;
