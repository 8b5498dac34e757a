use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    /// Identity; not part of the hyperparameter search space.
    Linear,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the input `x` and output `y = apply(x)`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "sgd")]
    Sgd,
    #[serde(rename = "rmsprop")]
    RmsProp,
    #[serde(rename = "adam")]
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    Dropout,
    BatchNorm,
}

macro_rules! text_enum {
    ($t:ty { $($v:ident => $s:literal $(| $alt:literal)*),+ $(,)? }) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(<$t>::$v => $s),+ })
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($s $(| $alt)* => Ok(<$t>::$v),)+
                    other => Err(Error::config(format!(concat!("unknown ", stringify!($t), " `{}`"), other))),
                }
            }
        }
    };
}

text_enum!(Activation { Tanh => "tanh", Relu => "relu", Sigmoid => "sigmoid", Linear => "linear" });
text_enum!(OptimizerKind { Sgd => "sgd", RmsProp => "rmsprop", Adam => "adam" });
text_enum!(Regularizer { Dropout => "dropout", BatchNorm => "batch_norm" | "bn" | "batchnorm" });

/// One network configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub n_hidden_layers: usize,
    pub n_units: usize,
    pub init_sd: f64,
    /// Ignored by batch-normalized networks.
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub activation: Activation,
    pub learning_rate: f64,
    pub n_epochs: usize,
    pub regularizer: Regularizer,
}

impl Default for HyperConfig {
    fn default() -> Self {
        HyperConfig {
            n_hidden_layers: 2,
            n_units: 8,
            init_sd: 0.05,
            dropout_rate: 0.5,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
            activation: Activation::Relu,
            learning_rate: 0.001,
            n_epochs: 200,
            regularizer: Regularizer::Dropout,
        }
    }
}

impl HyperConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m.to_string()));
        if self.n_hidden_layers == 0 || self.n_units == 0 {
            return bad("networks need at least one hidden layer with at least one unit");
        }
        if !(self.init_sd >= 0.0 && self.init_sd.is_finite()) {
            return bad("init_sd must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.n_epochs == 0 {
            return bad("batch_size and n_epochs must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        Ok(())
    }

    /// Dropout rate actually applied (zero for batch-normalized networks).
    pub fn effective_dropout(&self) -> f64 {
        match self.regularizer {
            Regularizer::Dropout => self.dropout_rate,
            Regularizer::BatchNorm => 0.0,
        }
    }
}
