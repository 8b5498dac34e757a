use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::config::{HyperConfig, Regularizer};
use super::network::NetworkState;
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seed;

/// Contiguous minibatches in row order; the last batch may be short.
///
/// With `merge_singleton`, a trailing batch of one row is folded into the
/// previous batch (batch normalization cannot use a single row).
pub fn batch_ranges(n: usize, batch_size: usize, merge_singleton: bool) -> Vec<Range<usize>> {
    let size = batch_size.max(1);
    let mut out: Vec<Range<usize>> = (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect();
    if merge_singleton && out.len() > 1 && out.last().is_some_and(|r| r.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("len > 1").end = last.end;
    }
    out
}

pub fn mse_of(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len(), "prediction and target lengths differ");
    if pred.is_empty() {
        return f64::NAN;
    }
    pred.iter().zip(target).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / pred.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Snapshot taken at the epoch with the lowest validation MSE.
    pub network: NetworkState,
    pub best_epoch: usize,
    pub best_validation_mse: f64,
    pub history: Vec<EpochRecord>,
}

fn flatten(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

/// Trains a network on `train`, scoring both sets in inference mode after
/// every epoch. All randomness (weights, dropout masks) derives from `seed`.
pub fn train(config: &HyperConfig, train: &FeatureMatrix, validation: &FeatureMatrix, seed: u64) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::domain("training and validation sets must be non-empty"));
    }
    if validation.width() != train.width() {
        return Err(Error::LengthMismatch("train and validation widths differ".into()));
    }
    let bn = config.regularizer == Regularizer::BatchNorm;
    if bn && train.len() < 2 {
        return Err(Error::DegenerateBatch(train.len()));
    }
    let width = train.width();
    let mut net = NetworkState::init(config, width, seed)?;
    let mut mask_rng = seed::rng_from(seed, &[1]);

    let x_train = flatten(&train.rows);
    let x_val = flatten(&validation.rows);
    let batches = batch_ranges(train.len(), config.batch_size, bn);

    let mut history = Vec::with_capacity(config.n_epochs);
    let mut best: Option<(usize, f64, NetworkState)> = None;
    for epoch in 1..=config.n_epochs {
        for r in &batches {
            let xb = &x_train[r.start * width..r.end * width];
            let yb = &train.target[r.clone()];
            let masks = net.sample_masks(r.len(), &mut mask_rng);
            let cache = net.forward_train(xb, &masks)?;
            let grads = net.backward(&cache, yb)?;
            net.update_running_stats(&cache);
            net.optimizer_step(&grads)?;
        }
        let train_mse = mse_of(&net.forward_infer(&x_train)?, &train.target);
        let validation_mse = mse_of(&net.forward_infer(&x_val)?, &validation.target);
        if !train_mse.is_finite() || !validation_mse.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            validation_mse,
        });
        if best.as_ref().is_none_or(|(_, v, _)| validation_mse < *v) {
            best = Some((epoch, validation_mse, net.clone()));
        }
    }
    let (best_epoch, best_validation_mse, network) = best.ok_or_else(|| Error::config("n_epochs must be >= 1"))?;
    Ok(TrainOutcome {
        network,
        best_epoch,
        best_validation_mse,
        history,
    })
}
