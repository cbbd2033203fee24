//! Streaming point predictors and a prequential benchmark harness.
//!
//! Every predictor implements [`SequentialPredictor`]: tokens arrive one at a
//! time through `update`, and `predict` forecasts the next token without
//! touching state. [`harness`] scores predictors by cumulative predictive
//! error and by how that error responds to Gaussian perturbation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod dirichlet;
pub mod error;
pub mod gpp;
pub mod harness;
pub mod methods;
pub mod repset;
pub mod shtarkov;
pub mod sketch;
pub mod types;

pub use error::{Error, Result};
pub use harness::{run_prequential, run_sensitivity, HarnessConfig, RunTrace, SensitivityCurve};
pub use methods::{build_predictor, MethodParams, MethodPredictor};
pub use types::{
    observations, Diagnostics, Family, Method, Observation, Prediction, PredictorId,
    SequentialPredictor, Sequencer,
};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
