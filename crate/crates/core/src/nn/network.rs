use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{Activation, HyperConfig, Regularizer};
use super::linalg::{a_bt, affine, at_b, col_sums};
use super::optim::OptimizerState;
use super::Predictor;
use crate::dataset::{Scaler, SplitBoundaries};
use crate::error::{Error, Result};
use crate::seed;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Dense layer with row-major `in_dim × out_dim` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn init<R: Rng>(in_dim: usize, out_dim: usize, sd: f64, rng: &mut R) -> Self {
        let weights = if sd > 0.0 {
            let normal = Normal::new(0.0, sd).expect("finite sd");
            (0..in_dim * out_dim).map(|_| normal.sample(rng)).collect()
        } else {
            vec![0.0; in_dim * out_dim]
        };
        Dense {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }
}

/// Weights, normalization statistics and optimizer buffers of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub input_width: usize,
    pub activation: Activation,
    pub regularizer: Regularizer,
    pub dropout_rate: f64,
    pub hidden: Vec<Dense>,
    /// One entry per hidden layer for batch-normalized networks, else empty.
    pub batch_norm: Vec<BatchNorm>,
    pub output: Dense,
    pub optimizer: OptimizerState,
    pub seed: u64,
}

/// Scaled keep-masks (`0` or `1 / (1 - p)`) per hidden layer, row-major `batch × units`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DropoutMasks(pub Vec<Vec<f64>>);

/// Intermediates of a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    input: Vec<f64>,
    layers: Vec<LayerCache>,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    /// Pre-activation after normalization (the activation input).
    pre: Vec<f64>,
    /// Activation output before dropout.
    act: Vec<f64>,
    /// Layer output after dropout; input to the next layer.
    out: Vec<f64>,
    mask: Option<Vec<f64>>,
    bn: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

/// Parameter gradients in [`NetworkState::parameters`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl NetworkState {
    /// Normal(0, init_sd²) weights drawn layer by layer from `seed`; zero biases.
    pub fn init(config: &HyperConfig, input_width: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if input_width == 0 {
            return Err(Error::domain("input width must be >= 1"));
        }
        let mut rng = seed::rng_from(seed, &[0]);
        let mut hidden = Vec::with_capacity(config.n_hidden_layers);
        let mut width = input_width;
        for _ in 0..config.n_hidden_layers {
            hidden.push(Dense::init(width, config.n_units, config.init_sd, &mut rng));
            width = config.n_units;
        }
        let output = Dense::init(width, 1, config.init_sd, &mut rng);
        let batch_norm = match config.regularizer {
            Regularizer::BatchNorm => (0..config.n_hidden_layers).map(|_| BatchNorm::new(config.n_units)).collect(),
            Regularizer::Dropout => Vec::new(),
        };
        let mut state = NetworkState {
            input_width,
            activation: config.activation,
            regularizer: config.regularizer,
            dropout_rate: config.effective_dropout(),
            hidden,
            batch_norm,
            output,
            optimizer: OptimizerState::new(config.optimizer, config.learning_rate),
            seed,
        };
        let shapes = state.parameters().iter().map(|p| p.len()).collect::<Vec<_>>();
        state.optimizer.ensure_buffers(&shapes);
        Ok(state)
    }

    /// Weight shapes `(rows, cols)` from input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.output))
            .map(|d| (d.in_dim, d.out_dim))
            .collect()
    }

    /// Trainable parameters: per hidden layer `W, b[, gamma, beta]`, then output `W, b`.
    pub fn parameters(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for (i, d) in self.hidden.iter().enumerate() {
            out.push(&d.weights);
            out.push(&d.bias);
            if let Some(bn) = self.batch_norm.get(i) {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out.push(&self.output.weights);
        out.push(&self.output.bias);
        out
    }

    pub(crate) fn split_params_mut(&mut self) -> (Vec<&mut Vec<f64>>, &mut OptimizerState) {
        let NetworkState {
            hidden,
            batch_norm,
            output,
            optimizer,
            ..
        } = self;
        let mut bn_iter = batch_norm.iter_mut();
        let mut out = Vec::new();
        for d in hidden.iter_mut() {
            out.push(&mut d.weights);
            out.push(&mut d.bias);
            if let Some(bn) = bn_iter.next() {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out.push(&mut output.weights);
        out.push(&mut output.bias);
        (out, optimizer)
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.split_params_mut().0
    }

    pub fn n_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Draws inverted-dropout keep-masks for a batch; empty when dropout is off.
    pub fn sample_masks<R: Rng>(&self, batch: usize, rng: &mut R) -> DropoutMasks {
        let p = self.dropout_rate;
        if self.regularizer != Regularizer::Dropout || p <= 0.0 {
            return DropoutMasks::default();
        }
        let keep = 1.0 / (1.0 - p);
        DropoutMasks(
            self.hidden
                .iter()
                .map(|d| {
                    (0..batch * d.out_dim)
                        .map(|_| if rng.gen::<f64>() >= p { keep } else { 0.0 })
                        .collect()
                })
                .collect(),
        )
    }

    fn check_input(&self, flat: &[f64]) -> Result<usize> {
        if !flat.len().is_multiple_of(self.input_width) {
            return Err(Error::LengthMismatch(format!(
                "batch of {} values is not a multiple of input width {}",
                flat.len(),
                self.input_width
            )));
        }
        Ok(flat.len() / self.input_width)
    }

    /// Training-mode forward pass: batch statistics for normalization and the
    /// supplied dropout masks. Does not touch running statistics.
    pub fn forward_train(&self, input: &[f64], masks: &DropoutMasks) -> Result<ForwardCache> {
        let n = self.check_input(input)?;
        if self.regularizer == Regularizer::BatchNorm && n < 2 {
            return Err(Error::DegenerateBatch(n));
        }
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut prev: &[f64] = input;
        for (l, dense) in self.hidden.iter().enumerate() {
            let m = dense.out_dim;
            let z = affine(prev, n, dense.in_dim, &dense.weights, m, &dense.bias);
            let (pre, bn_cache) = match self.batch_norm.get(l) {
                Some(bn) => {
                    let mean: Vec<f64> = col_sums(&z, m).into_iter().map(|s| s / n as f64).collect();
                    let mut var = vec![0.0; m];
                    for row in z.chunks_exact(m) {
                        for j in 0..m {
                            let d = row[j] - mean[j];
                            var[j] += d * d;
                        }
                    }
                    var.iter_mut().for_each(|v| *v /= n as f64);
                    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
                    let mut xhat = Vec::with_capacity(z.len());
                    let mut pre = Vec::with_capacity(z.len());
                    for row in z.chunks_exact(m) {
                        for j in 0..m {
                            let xh = (row[j] - mean[j]) * inv_std[j];
                            xhat.push(xh);
                            pre.push(bn.gamma[j] * xh + bn.beta[j]);
                        }
                    }
                    (
                        pre,
                        Some(BnCache {
                            xhat,
                            inv_std,
                            mean,
                            var,
                        }),
                    )
                }
                None => (z, None),
            };
            let act: Vec<f64> = pre.iter().map(|&x| self.activation.apply(x)).collect();
            let (out, mask) = match masks.0.get(l) {
                Some(mask) => {
                    if mask.len() != act.len() {
                        return Err(Error::LengthMismatch(format!(
                            "dropout mask for layer {l} has {} entries, expected {}",
                            mask.len(),
                            act.len()
                        )));
                    }
                    (act.iter().zip(mask).map(|(a, k)| a * k).collect(), Some(mask.clone()))
                }
                None => (act.clone(), None),
            };
            layers.push(LayerCache {
                pre,
                act,
                out,
                mask,
                bn: bn_cache,
            });
            prev = &layers.last().expect("just pushed").out;
        }
        let predictions = affine(prev, n, self.output.in_dim, &self.output.weights, 1, &self.output.bias);
        Ok(ForwardCache {
            batch: n,
            input: input.to_vec(),
            layers,
            predictions,
        })
    }

    /// Folds the batch statistics of a training pass into the running averages.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (bn, layer) in self.batch_norm.iter_mut().zip(&cache.layers) {
            if let Some(c) = &layer.bn {
                for j in 0..bn.running_mean.len() {
                    bn.running_mean[j] = BN_MOMENTUM * bn.running_mean[j] + (1.0 - BN_MOMENTUM) * c.mean[j];
                    bn.running_var[j] = BN_MOMENTUM * bn.running_var[j] + (1.0 - BN_MOMENTUM) * c.var[j];
                }
            }
        }
    }

    /// Inference-mode forward pass: no dropout, running statistics for normalization.
    pub fn forward_infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        let n = self.check_input(input)?;
        let mut cur = input.to_vec();
        for (l, dense) in self.hidden.iter().enumerate() {
            let m = dense.out_dim;
            let mut z = affine(&cur, n, dense.in_dim, &dense.weights, m, &dense.bias);
            if let Some(bn) = self.batch_norm.get(l) {
                let scale: Vec<f64> = (0..m)
                    .map(|j| bn.gamma[j] / (bn.running_var[j] + BN_EPSILON).sqrt())
                    .collect();
                for row in z.chunks_exact_mut(m) {
                    for j in 0..m {
                        row[j] = (row[j] - bn.running_mean[j]) * scale[j] + bn.beta[j];
                    }
                }
            }
            z.iter_mut().for_each(|x| *x = self.activation.apply(*x));
            cur = z;
        }
        Ok(affine(&cur, n, self.output.in_dim, &self.output.weights, 1, &self.output.bias))
    }

    /// Exact gradients of `mean((pred - target)^2)` for the cached batch.
    pub fn backward(&self, cache: &ForwardCache, targets: &[f64]) -> Result<Gradients> {
        let n = cache.batch;
        if targets.len() != n {
            return Err(Error::LengthMismatch(format!("{} targets for a batch of {n}", targets.len())));
        }
        let mut grads_rev: Vec<Vec<f64>> = Vec::new();

        let d_out: Vec<f64> = cache
            .predictions
            .iter()
            .zip(targets)
            .map(|(p, y)| 2.0 * (p - y) / n as f64)
            .collect();
        let last_out: &[f64] = cache.layers.last().map_or(&cache.input, |l| &l.out);
        grads_rev.push(col_sums(&d_out, 1));
        grads_rev.push(at_b(last_out, n, self.output.in_dim, &d_out, 1));
        let mut d_a = a_bt(&d_out, n, 1, &self.output.weights, self.output.in_dim);

        for l in (0..self.hidden.len()).rev() {
            let dense = &self.hidden[l];
            let layer = &cache.layers[l];
            let m = dense.out_dim;
            if let Some(mask) = &layer.mask {
                d_a.iter_mut().zip(mask).for_each(|(g, k)| *g *= k);
            }
            let d_pre: Vec<f64> = d_a
                .iter()
                .zip(layer.pre.iter().zip(&layer.act))
                .map(|(g, (x, y))| g * self.activation.derivative(*x, *y))
                .collect();
            let d_z = match (&layer.bn, self.batch_norm.get(l)) {
                (Some(c), Some(bn)) => {
                    let mut d_gamma = vec![0.0; m];
                    let d_beta = col_sums(&d_pre, m);
                    let mut sum_dxhat = vec![0.0; m];
                    let mut sum_dxhat_xhat = vec![0.0; m];
                    for (drow, xrow) in d_pre.chunks_exact(m).zip(c.xhat.chunks_exact(m)) {
                        for j in 0..m {
                            d_gamma[j] += drow[j] * xrow[j];
                            let dxh = drow[j] * bn.gamma[j];
                            sum_dxhat[j] += dxh;
                            sum_dxhat_xhat[j] += dxh * xrow[j];
                        }
                    }
                    let nf = n as f64;
                    let mut d_z = Vec::with_capacity(d_pre.len());
                    for (drow, xrow) in d_pre.chunks_exact(m).zip(c.xhat.chunks_exact(m)) {
                        for j in 0..m {
                            let dxh = drow[j] * bn.gamma[j];
                            d_z.push(c.inv_std[j] / nf * (nf * dxh - sum_dxhat[j] - xrow[j] * sum_dxhat_xhat[j]));
                        }
                    }
                    grads_rev.push(d_beta);
                    grads_rev.push(d_gamma);
                    d_z
                }
                _ => d_pre,
            };
            let prev: &[f64] = if l == 0 { &cache.input } else { &cache.layers[l - 1].out };
            grads_rev.push(col_sums(&d_z, m));
            grads_rev.push(at_b(prev, n, dense.in_dim, &d_z, m));
            if l > 0 {
                d_a = a_bt(&d_z, n, m, &dense.weights, dense.in_dim);
            }
        }
        grads_rev.reverse();
        Ok(Gradients(grads_rev))
    }

    /// One optimizer update with `grads` in parameter order.
    pub fn optimizer_step(&mut self, grads: &Gradients) -> Result<()> {
        let (params, opt) = self.split_params_mut();
        opt.step(params, &grads.0)
    }
}

impl Predictor for NetworkState {
    fn input_width(&self) -> usize {
        self.input_width
    }

    fn predict_flat(&self, rows: &[f64]) -> Vec<f64> {
        self.forward_infer(rows).expect("input width checked by caller")
    }
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// On-disk form of a trained model.
///
/// ```json
/// { "schema_version": 1, "config": {..}, "columns": [..], "seed": 7,
///   "network": { "input_width": 17, "hidden": [..], "batch_norm": [..], "output": {..}, .. },
///   "scaler": { "mean": [..], "scale": [..], "constant": [..] }, "split": {..} }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub config: HyperConfig,
    pub columns: Vec<String>,
    pub seed: u64,
    pub network: NetworkState,
    pub scaler: Scaler,
    pub split: SplitBoundaries,
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ModelFile = serde_json::from_str(text)?;
        if m.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::config(format!("unsupported model schema version {}", m.schema_version)));
        }
        if m.network.input_width != m.columns.len() || m.scaler.mean.len() != m.columns.len() {
            return Err(Error::config("model file columns disagree with network input width"));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::super::config::OptimizerKind;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(layers: usize, units: usize, act: Activation, reg: Regularizer) -> HyperConfig {
        HyperConfig {
            n_hidden_layers: layers,
            n_units: units,
            init_sd: 0.5,
            dropout_rate: 0.3,
            batch_size: 8,
            optimizer: OptimizerKind::Sgd,
            activation: act,
            learning_rate: 0.01,
            n_epochs: 1,
            regularizer: reg,
        }
    }

    fn loss(net: &NetworkState, x: &[f64], y: &[f64], masks: &DropoutMasks) -> f64 {
        let p = net.forward_train(x, masks).unwrap().predictions;
        p.iter().zip(y).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / y.len() as f64
    }

    fn fd_check(net: &mut NetworkState, x: &[f64], y: &[f64], masks: &DropoutMasks) {
        let cache = net.forward_train(x, masks).unwrap();
        let grads = net.backward(&cache, y).unwrap();
        let h = 1e-6;
        let n_params = net.parameters().len();
        assert_eq!(grads.0.len(), n_params);
        for pi in 0..n_params {
            for k in 0..grads.0[pi].len() {
                let orig = net.parameters()[pi][k];
                net.parameters_mut()[pi][k] = orig + h;
                let up = loss(net, x, y, masks);
                net.parameters_mut()[pi][k] = orig - h;
                let down = loss(net, x, y, masks);
                net.parameters_mut()[pi][k] = orig;
                let fd = (up - down) / (2.0 * h);
                let a = grads.0[pi][k];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4);
                assert!(rel < 1e-5, "param {pi}[{k}]: analytic {a} vs numeric {fd}");
            }
        }
    }

    #[test]
    fn hand_forward_pass() {
        let mut net = NetworkState::init(&config(1, 2, Activation::Relu, Regularizer::Dropout), 2, 0).unwrap();
        net.hidden[0].weights = vec![1.0, -1.0, 2.0, 0.5];
        net.hidden[0].bias = vec![0.1, 0.0];
        net.output.weights = vec![3.0, -2.0];
        net.output.bias = vec![0.25];
        // z = [1 + 4 + 0.1, -1 + 1] = [5.1, 0]; y = 3 * 5.1 + 0.25
        let p = net.forward_infer(&[1.0, 2.0]).unwrap();
        assert!((p[0] - 15.55).abs() < 1e-12);
        // identical to training mode without masks
        let t = net.forward_train(&[1.0, 2.0], &DropoutMasks::default()).unwrap();
        assert_eq!(t.predictions, p);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..6 * 3).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for act in [Activation::Tanh, Activation::Sigmoid, Activation::Linear] {
            for reg in [Regularizer::Dropout, Regularizer::BatchNorm] {
                let mut net = NetworkState::init(&config(2, 4, act, reg), 3, 5).unwrap();
                let masks = net.sample_masks(6, &mut rng);
                fd_check(&mut net, &x, &y, &masks);
            }
        }
    }

    #[test]
    fn batch_norm_normalizes_training_batch() {
        let mut net = NetworkState::init(&config(1, 3, Activation::Linear, Regularizer::BatchNorm), 2, 1).unwrap();
        net.batch_norm[0].gamma = vec![1.0; 3];
        let x = [0.3, -1.0, 2.0, 0.5, -0.7, 0.1, 1.1, 1.9];
        let cache = net.forward_train(&x, &DropoutMasks::default()).unwrap();
        let pre = &cache.layers[0].pre;
        for j in 0..3 {
            let col: Vec<f64> = pre.iter().skip(j).step_by(3).copied().collect();
            let mean = col.iter().sum::<f64>() / 4.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
        assert!(matches!(net.forward_train(&x[..2], &DropoutMasks::default()), Err(Error::DegenerateBatch(1))));
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut net = NetworkState::init(&config(1, 2, Activation::Relu, Regularizer::BatchNorm), 1, 3).unwrap();
        let cache = net.forward_train(&[1.0, 3.0], &DropoutMasks::default()).unwrap();
        let w = net.hidden[0].weights.clone();
        net.update_running_stats(&cache);
        for j in 0..2 {
            let mean = 2.0 * w[j];
            let var = w[j] * w[j];
            assert!((net.batch_norm[0].running_mean[j] - 0.1 * mean).abs() < 1e-12);
            assert!((net.batch_norm[0].running_var[j] - (0.9 + 0.1 * var)).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_masks_preserve_expectation() {
        let net = NetworkState::init(&config(1, 50, Activation::Relu, Regularizer::Dropout), 1, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let masks = net.sample_masks(2000, &mut rng);
        let m = &masks.0[0];
        let keep = 1.0 / 0.7;
        assert!(m.iter().all(|&v| v == 0.0 || v == keep));
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        let bn = NetworkState::init(&config(1, 5, Activation::Relu, Regularizer::BatchNorm), 1, 0).unwrap();
        assert!(bn.sample_masks(10, &mut rng).0.is_empty());
    }

    #[test]
    fn init_shapes_and_statistics() {
        let mut c = config(3, 64, Activation::Tanh, Regularizer::BatchNorm);
        c.init_sd = 0.1;
        let net = NetworkState::init(&c, 17, 9).unwrap();
        assert_eq!(net.layer_shapes(), vec![(17, 64), (64, 64), (64, 64), (64, 1)]);
        assert_eq!(net.parameters().len(), 3 * 4 + 2);
        let w: Vec<f64> = net.hidden.iter().flat_map(|d| d.weights.iter().copied()).collect();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
        assert!(mean.abs() < 0.005);
        assert!((sd - 0.1).abs() < 0.005);
        assert!(net.hidden.iter().all(|d| d.bias.iter().all(|&b| b == 0.0)));
        assert_eq!(NetworkState::init(&c, 17, 9).unwrap(), net);
        assert_ne!(NetworkState::init(&c, 17, 10).unwrap(), net);
    }

    #[test]
    fn model_file_round_trip() {
        let c = config(1, 3, Activation::Relu, Regularizer::Dropout);
        let net = NetworkState::init(&c, 2, 4).unwrap();
        let m = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            config: c,
            columns: vec!["a".into(), "b".into()],
            seed: 4,
            network: net,
            scaler: Scaler {
                mean: vec![0.0, 1.0],
                scale: vec![1.0, 2.0],
                constant: vec![false, false],
            },
            split: SplitBoundaries {
                experiment: crate::dataset::ExperimentId::Exp1,
                train_first: crate::YearMonth::new(1950, 1).unwrap(),
                train_last: crate::YearMonth::new(1960, 1).unwrap(),
                validation_first: crate::YearMonth::new(1960, 2).unwrap(),
                validation_last: crate::YearMonth::new(1970, 1).unwrap(),
                test_first: None,
                test_last: None,
                n_train: 121,
                n_validation: 120,
                n_test: 0,
            },
        };
        let back = ModelFile::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
