//! Noisy Bayesian quadrature over Matérn-kernel function spaces.
//!
//! The crate estimates weighted integrals `I = ∫ f(x) p(x) dx` over `[0,1]^d`
//! from noisy point queries `y = f(x) + N(0, σ²)` using three strategies:
//!
//! * plain Monte Carlo ([`quadrature::run_mc`]),
//! * maximum-variance sampling followed by integrating the GP posterior mean
//!   ([`quadrature::run_mvs`]),
//! * the two-batch estimator ([`quadrature::run_mvs_mc`]): a maximum-variance
//!   batch builds a posterior mean `μ`, and a Monte Carlo batch estimates the
//!   residual `∫ p (f − μ)`.
//!
//! Supporting modules provide the Matérn kernel ([`kernel`]), exact GP
//! regression with incremental Cholesky updates ([`gp`]), integrands including
//! hard-instance constructions ([`integrands`]), an independent ground-truth
//! integrator ([`oracle`]) and an experiment harness ([`harness`]) that
//! measures error scaling laws.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gp;
pub mod harness;
pub mod integrands;
pub mod kernel;
pub mod linalg;
pub mod oracle;
pub mod qmc;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use gp::{ConfidenceBand, GpState};
pub use integrands::{Integrand, NoisyOracle, WeightDensity};
pub use kernel::{KernelSpec, SmoothnessInfo};
pub use quadrature::{EstimateTrace, StrategyConfig, StrategyKind};

/// A point in `[0,1]^d`.
pub type Point = Vec<f64>;
