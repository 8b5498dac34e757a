//! Feedforward regression networks trained by backpropagation.
//!
//! Hidden layers are dense, followed by either batch normalization of the
//! pre-activation or inverted dropout of the activation; the output layer is
//! a single linear unit. Loss is mean squared error.

mod config;
mod linalg;
mod network;
mod optim;
mod train;

pub use config::{Activation, HyperConfig, OptimizerKind, Regularizer};
pub use network::{Dense, BatchNorm, DropoutMasks, ForwardCache, Gradients, NetworkState, ModelFile, MODEL_SCHEMA_VERSION};
pub use optim::{OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, RMSPROP_DECAY, RMSPROP_EPSILON};
pub use train::{batch_ranges, mse_of, train, EpochRecord, TrainOutcome};

/// Anything that maps feature rows to scalar forecasts.
pub trait Predictor: Sync {
    fn input_width(&self) -> usize;

    /// Row-major batch of `rows.len() / input_width()` inputs.
    fn predict_flat(&self, rows: &[f64]) -> Vec<f64>;

    fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        self.predict_flat(&flat)
    }
}
