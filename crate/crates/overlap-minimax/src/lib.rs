//! Minimax confidence intervals for average treatment effects when overlap is limited.
//!
//! The crate splits the sample average treatment effect into a part over units
//! with adequate overlap and a part over units without it. The latter is
//! bounded over a Lipschitz class of outcome functions by solving a modulus of
//! continuity problem, which yields a linear estimator, its worst-case bias
//! and a fixed-length confidence interval.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::manual_range_contains)]

pub mod asymptotic;
pub mod data;
pub mod error;
pub mod io;
pub mod lipschitz;
pub mod minimax_ci;
pub mod modulus;
pub mod real;
pub mod simulation;

pub use error::{Error, Result};
pub use real::Real;

pub type Dataset = data::Dataset<f64>;
pub type OverlapPartition = data::OverlapPartition<f64>;
pub type LipschitzClass = lipschitz::LipschitzClass<f64>;
pub type ModulusProblem = modulus::ModulusProblem<f64>;
pub type ModulusSolution = modulus::ModulusSolution<f64>;
pub type IntervalReport = minimax_ci::IntervalReport<f64>;
pub type AsymptoticCi = asymptotic::AsymptoticCi<f64>;
pub type ConfidenceSequence = minimax_ci::ConfidenceSequence<f64>;
pub type EstimandDecomposition = data::EstimandDecomposition<f64>;
pub type KnnRegressor = lipschitz::KnnRegressor<f64>;
pub type DistanceMatrix = lipschitz::DistanceMatrix<f64>;
