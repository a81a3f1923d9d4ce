//! Stochastic optimal-transport map estimation.
//!
//! Markov kernels are estimated from samples and scored by the
//! transportation error E_p: the excess transport cost of the kernel over
//! W_p(μ, ν) plus the W_p distance between its pushforward and ν.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corruption;
pub mod error;
pub mod error_metric;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod kernels;
pub mod measures;
pub mod ot;
pub mod rng;
mod stats;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, Point};
pub use ot::{CostMatrix, EotSolution, TransportPlan};
pub use error_metric::{transportation_error, EpReport};
pub use estimators::{EstimatorConfig, EstimatorKind, FittedEstimator};
pub use experiments::ExperimentConfig;
pub use kernels::{KernelPipeline, MonteCarloConfig};
