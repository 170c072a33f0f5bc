//! Sparsity-promoting integral concurrent learning (SP-ICL) for linearly parametrized
//! control-affine systems `ẋ = Y(x)θ + g(x)u`.
//!
//! The core is generic over the floating point type through [`Scalar`]; the `*64`
//! aliases below fix it to `f64`, which is what the CLI and the reference scenario use.

// `!(x > 0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod history_stack;
pub mod integrator;
pub mod linalg;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type BasisLibrary64 = basis::BasisLibrary<f64>;
pub type HistoryStack64 = history_stack::HistoryStack<f64>;
pub type MemoryRegressor64 = history_stack::MemoryRegressor<f64>;
pub type EstimatorState64 = estimator::EstimatorState<f64>;
pub type SimConfig64 = experiment::SimConfig<f64>;
pub type RunResult64 = experiment::RunResult<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type SimConfig32 = experiment::SimConfig<f32>;
