#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use stockhpo::dataset::{split, ExperimentId, ExperimentWindow, FeatureMatrix, SplitDataset};
use stockhpo::date::YearMonth;
use stockhpo::nn::{Activation, HyperConfig, NetworkState, OptimizerKind, Regularizer};
use stockhpo::seed::rng_from;

pub fn start() -> YearMonth {
    YearMonth::new(1950, 1).unwrap()
}

/// Monthly rows from 1950-01 with standard normal features and
/// `target = f(row) + noise_sd * N(0, 1)`.
pub fn synthetic_matrix(n: usize, p: usize, seed: u64, noise_sd: f64, f: impl Fn(&[f64]) -> f64) -> FeatureMatrix {
    let mut rng = rng_from(seed, &[]);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let target = rows
        .iter()
        .map(|r| {
            let e: f64 = StandardNormal.sample(&mut rng);
            f(r) + noise_sd * e
        })
        .collect();
    FeatureMatrix {
        dates: (0..n).map(|i| start().add_months(i as i32)).collect(),
        columns: (0..p).map(|j| format!("x{j}")).collect(),
        rows,
        target,
    }
}

/// Splits `data` with the last `n_oos` targets out-of-sample.
pub fn split_tail(data: &FeatureMatrix, n_oos: usize) -> SplitDataset {
    let end = data.target_date(data.len() - 1);
    let w = ExperimentWindow::new(ExperimentId::Exp1, start(), end, end.add_months(1 - n_oos as i32)).unwrap();
    split(data, &w).unwrap()
}

pub fn tiny_config(activation: Activation, regularizer: Regularizer) -> HyperConfig {
    HyperConfig {
        n_hidden_layers: 2,
        n_units: 4,
        init_sd: 0.5,
        dropout_rate: 0.25,
        batch_size: 16,
        optimizer: OptimizerKind::Adam,
        activation,
        learning_rate: 0.01,
        n_epochs: 20,
        regularizer,
    }
}

/// Data produced by a fixed teacher network, rescaled to unit variance,
/// plus Gaussian noise of sd `noise_sd`.
pub fn teacher_split(seed: u64, n: usize, p: usize, noise_sd: f64) -> SplitDataset {
    let teacher_cfg = HyperConfig {
        n_hidden_layers: 2,
        n_units: 8,
        init_sd: 0.8,
        ..tiny_config(Activation::Tanh, Regularizer::Dropout)
    };
    let teacher = NetworkState::init(&teacher_cfg, p, seed ^ 0x5eed).unwrap();
    let raw = synthetic_matrix(n, p, seed, 0.0, |r| teacher.forward_infer(r).unwrap()[0]);
    let mean = raw.target.iter().sum::<f64>() / n as f64;
    let sd = (raw.target.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut rng = rng_from(seed, &[1]);
    let mut data = raw;
    for y in data.target.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *y = (*y - mean) / sd + noise_sd * e;
    }
    split_tail(&data, n / 5)
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}
