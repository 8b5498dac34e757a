//! Monthly equity-return forecasting with hyperparameter-optimized
//! feedforward networks.
//!
//! The pipeline runs from raw monthly market files to evaluation reports:
//!
//! - [`market_data`]: OHLCV and Goyal–Welch CSV ingestion, log returns
//! - [`technical`] and [`fundamentals`]: the 17 binary technical signals and the 14 fundamental predictors
//! - [`dataset`]: supervised pairs `(x_t, r_{t+1})`, experiment windows, chronological splits, scaling
//! - [`nn`]: feedforward regression networks with dropout or batch normalization
//! - [`hpo`]: TPE, simulated annealing and random search over the categorical search space
//! - [`evaluation`]: MSE, in-sample and out-of-sample R², OLS baseline, seed aggregation
//! - [`attribution`]: Shapley attributions, mean-|SHAP| importance, rank stability
//! - [`experiment`]: configuration-driven orchestration behind the `stockhpo` CLI

// `!(x > 0.0)` style checks are meant to catch NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod date;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod fundamentals;
pub mod hpo;
pub mod market_data;
pub mod nn;
pub mod seed;
pub mod technical;

pub use date::YearMonth;
pub use error::{Error, Result};
