use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, HyperConfig, OptimizerKind, Regularizer};

/// Categorical hyperparameter dimensions in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    HiddenLayers,
    Units,
    InitSd,
    DropoutRate,
    BatchSize,
    Optimizer,
    Activation,
    LearningRate,
}

impl Dim {
    pub const ALL: [Dim; 8] = [
        Dim::HiddenLayers,
        Dim::Units,
        Dim::InitSd,
        Dim::DropoutRate,
        Dim::BatchSize,
        Dim::Optimizer,
        Dim::Activation,
        Dim::LearningRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dim::HiddenLayers => "n_hidden_layers",
            Dim::Units => "n_units",
            Dim::InitSd => "init_sd",
            Dim::DropoutRate => "dropout_rate",
            Dim::BatchSize => "batch_size",
            Dim::Optimizer => "optimizer",
            Dim::Activation => "activation",
            Dim::LearningRate => "learning_rate",
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered choice lists per dimension. `regularizer` and `n_epochs` are fixed
/// for a study rather than searched.
///
/// A space file is TOML with any subset of the list fields, e.g.
///
/// ```toml
/// n_hidden_layers = [2, 3]
/// n_units = [4, 8]
/// optimizer = ["adam"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub n_hidden_layers: Vec<usize>,
    pub n_units: Vec<usize>,
    pub init_sd: Vec<f64>,
    pub dropout_rate: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub optimizer: Vec<OptimizerKind>,
    pub activation: Vec<Activation>,
    pub learning_rate: Vec<f64>,
    #[serde(skip)]
    pub regularizer: Regularizer,
    #[serde(skip)]
    pub n_epochs: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace::standard(Regularizer::Dropout, 200)
    }
}

/// A configuration as one choice index per active dimension.
pub type Point = Vec<usize>;

impl SearchSpace {
    /// The full grid: 1944 configurations with dropout, 648 with batch normalization.
    pub fn standard(regularizer: Regularizer, n_epochs: usize) -> Self {
        SearchSpace {
            n_hidden_layers: vec![2, 3],
            n_units: vec![2, 4, 8, 16],
            init_sd: vec![0.025, 0.05, 0.075],
            dropout_rate: vec![0.25, 0.5, 0.75],
            batch_size: vec![28, 64, 128],
            optimizer: vec![OptimizerKind::Sgd, OptimizerKind::RmsProp, OptimizerKind::Adam],
            activation: vec![Activation::Tanh, Activation::Relu, Activation::Sigmoid],
            learning_rate: vec![0.001],
            regularizer,
            n_epochs,
        }
    }

    pub fn from_toml(text: &str, regularizer: Regularizer, n_epochs: usize) -> Result<Self> {
        let mut s: SearchSpace = toml::from_str(text)?;
        s.regularizer = regularizer;
        s.n_epochs = n_epochs;
        s.validate()?;
        Ok(s)
    }

    pub fn with_study(mut self, regularizer: Regularizer, n_epochs: usize) -> Self {
        self.regularizer = regularizer;
        self.n_epochs = n_epochs;
        self
    }

    /// Dimensions that are searched; dropout rate only for dropout networks.
    pub fn dims(&self) -> Vec<Dim> {
        Dim::ALL
            .into_iter()
            .filter(|d| *d != Dim::DropoutRate || self.regularizer == Regularizer::Dropout)
            .collect()
    }

    pub fn n_choices(&self, dim: Dim) -> usize {
        match dim {
            Dim::HiddenLayers => self.n_hidden_layers.len(),
            Dim::Units => self.n_units.len(),
            Dim::InitSd => self.init_sd.len(),
            Dim::DropoutRate => self.dropout_rate.len(),
            Dim::BatchSize => self.batch_size.len(),
            Dim::Optimizer => self.optimizer.len(),
            Dim::Activation => self.activation.len(),
            Dim::LearningRate => self.learning_rate.len(),
        }
    }

    /// Choice counts of the active dimensions, in [`SearchSpace::dims`] order.
    pub fn cardinalities(&self) -> Vec<usize> {
        self.dims().into_iter().map(|d| self.n_choices(d)).collect()
    }

    pub fn size(&self) -> usize {
        self.cardinalities().iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        for d in self.dims() {
            if self.n_choices(d) == 0 {
                return Err(Error::config(format!("search space dimension `{d}` is empty")));
            }
        }
        if self.n_epochs == 0 {
            return Err(Error::config("n_epochs must be positive"));
        }
        // every combination must form a valid network configuration
        let probe = |d: Dim, k: usize| {
            let mut p: Point = self.dims().iter().map(|_| 0).collect();
            let pos = self.dims().iter().position(|x| *x == d).expect("active dim");
            p[pos] = k;
            self.config_at(&p).validate()
        };
        for d in self.dims() {
            for k in 0..self.n_choices(d) {
                probe(d, k)?;
            }
        }
        Ok(())
    }

    pub fn config_at(&self, point: &[usize]) -> HyperConfig {
        let mut c = HyperConfig {
            regularizer: self.regularizer,
            n_epochs: self.n_epochs,
            dropout_rate: 0.0,
            ..HyperConfig::default()
        };
        for (d, &k) in self.dims().iter().zip(point) {
            match d {
                Dim::HiddenLayers => c.n_hidden_layers = self.n_hidden_layers[k],
                Dim::Units => c.n_units = self.n_units[k],
                Dim::InitSd => c.init_sd = self.init_sd[k],
                Dim::DropoutRate => c.dropout_rate = self.dropout_rate[k],
                Dim::BatchSize => c.batch_size = self.batch_size[k],
                Dim::Optimizer => c.optimizer = self.optimizer[k],
                Dim::Activation => c.activation = self.activation[k],
                Dim::LearningRate => c.learning_rate = self.learning_rate[k],
            }
        }
        c
    }

    /// Inverse of [`SearchSpace::config_at`]; `None` if the configuration is outside the space.
    pub fn point_of(&self, c: &HyperConfig) -> Option<Point> {
        if c.regularizer != self.regularizer || c.n_epochs != self.n_epochs {
            return None;
        }
        self.dims()
            .into_iter()
            .map(|d| match d {
                Dim::HiddenLayers => self.n_hidden_layers.iter().position(|v| *v == c.n_hidden_layers),
                Dim::Units => self.n_units.iter().position(|v| *v == c.n_units),
                Dim::InitSd => self.init_sd.iter().position(|v| *v == c.init_sd),
                Dim::DropoutRate => self.dropout_rate.iter().position(|v| *v == c.dropout_rate),
                Dim::BatchSize => self.batch_size.iter().position(|v| *v == c.batch_size),
                Dim::Optimizer => self.optimizer.iter().position(|v| *v == c.optimizer),
                Dim::Activation => self.activation.iter().position(|v| *v == c.activation),
                Dim::LearningRate => self.learning_rate.iter().position(|v| *v == c.learning_rate),
            })
            .collect()
    }

    pub fn contains(&self, c: &HyperConfig) -> bool {
        self.point_of(c).is_some()
    }

    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Point {
        self.cardinalities().into_iter().map(|k| rng.gen_range(0..k)).collect()
    }
}
