//! Shapley attributions of forecasts to input features.
//!
//! The value of a coalition `S` for an instance `x` is the average model
//! output over a background sample with the features in `S` set to `x`
//! (interventional expectation). Exact values enumerate all `2^p`
//! coalitions; the sampled estimator is KernelSHAP with the efficiency
//! constraint imposed exactly.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ExperimentId;
use crate::error::{Error, Result};
use crate::nn::Predictor;
use crate::seed::{self, stream};

pub const MAX_EXACT_FEATURES: usize = 20;
/// Coalition masks are stored in a `u64`.
pub const MAX_SAMPLED_FEATURES: usize = 63;

/// Rows per model call when evaluating coalition values.
const EVAL_CHUNK_ROWS: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapInstances {
    Test,
    InSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapSettings {
    pub background_size: usize,
    pub n_coalitions: usize,
    /// Largest feature count explained exactly unless `force_exact` is set.
    pub exact_max_features: usize,
    pub force_exact: bool,
    pub instances: ShapInstances,
    /// Explain at most this many instances (evenly spaced); `None` for all.
    pub max_instances: Option<usize>,
}

impl Default for ShapSettings {
    fn default() -> Self {
        ShapSettings {
            background_size: 100,
            n_coalitions: 4096,
            exact_max_features: 15,
            force_exact: false,
            instances: ShapInstances::Test,
            max_instances: None,
        }
    }
}

impl ShapSettings {
    pub fn use_exact(&self, p: usize) -> bool {
        self.force_exact || p <= self.exact_max_features
    }
}

/// `k` rows taken at evenly spaced positions (all rows when `k >= n`).
pub fn evenly_spaced<T: Clone>(rows: &[T], k: usize) -> Vec<T> {
    let n = rows.len();
    if k >= n {
        return rows.to_vec();
    }
    (0..k).map(|i| rows[i * n / k].clone()).collect()
}

/// Averages of the model over the background with coalition features fixed.
struct ValueFunction<'a> {
    model: &'a dyn Predictor,
    background: &'a [Vec<f64>],
    p: usize,
}

impl<'a> ValueFunction<'a> {
    fn new(model: &'a dyn Predictor, background: &'a [Vec<f64>]) -> Result<Self> {
        let p = model.input_width();
        if background.is_empty() {
            return Err(Error::domain("background sample is empty"));
        }
        if background.iter().any(|r| r.len() != p) {
            return Err(Error::LengthMismatch(format!("background rows must have {p} features")));
        }
        Ok(ValueFunction { model, background, p })
    }

    /// `v(S)` for every mask; bit `j` of a mask selects feature `j` from `x`.
    fn values(&self, x: &[f64], masks: &[u64]) -> Vec<f64> {
        let nb = self.background.len();
        let per_chunk = (EVAL_CHUNK_ROWS / nb).max(1);
        masks
            .par_chunks(per_chunk)
            .flat_map_iter(|chunk| {
                let mut flat = Vec::with_capacity(chunk.len() * nb * self.p);
                for &m in chunk {
                    for b in self.background {
                        flat.extend((0..self.p).map(|j| if m >> j & 1 == 1 { x[j] } else { b[j] }));
                    }
                }
                let preds = self.model.predict_flat(&flat);
                preds
                    .chunks(nb)
                    .map(|c| c.iter().sum::<f64>() / nb as f64)
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact Shapley values and the base value `v(∅)` for one instance.
pub fn shap_exact(model: &dyn Predictor, instance: &[f64], background: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let vf = ValueFunction::new(model, background)?;
    let p = vf.p;
    if p > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            p,
            max: MAX_EXACT_FEATURES,
        });
    }
    if instance.len() != p {
        return Err(Error::LengthMismatch(format!("instance has {} features, model {p}", instance.len())));
    }
    let masks: Vec<u64> = (0..1u64 << p).collect();
    let v = vf.values(instance, &masks);
    let fact = factorials(p);
    // weight of a coalition of size s not containing i
    let w: Vec<f64> = (0..p).map(|s| fact[s] * fact[p - s - 1] / fact[p]).collect();
    let mut phi = vec![0.0; p];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1u64 << i;
        let mut acc = 0.0;
        for m in 0..1u64 << p {
            if m & bit == 0 {
                acc += w[m.count_ones() as usize] * (v[(m | bit) as usize] - v[m as usize]);
            }
        }
        *phi_i = acc;
    }
    Ok((phi, v[0]))
}

/// Coalitions and their kernel weights: all coalitions of the smallest and
/// largest sizes that the budget covers completely, then random paired
/// draws over the remaining sizes sharing the leftover kernel mass.
fn kernel_coalitions<R: Rng>(p: usize, n_coalitions: usize, rng: &mut R) -> BTreeMap<u64, f64> {
    let mut out: BTreeMap<u64, f64> = BTreeMap::new();
    // sizes 1..=ceil((p-1)/2); sizes below p/2 pair with their complement
    let n_sizes = p.saturating_sub(1).div_ceil(2);
    let n_paired = p.saturating_sub(1) / 2;
    if n_sizes == 0 {
        return out;
    }
    let mut weight: Vec<f64> = (1..=n_sizes).map(|s| (p - 1) as f64 / (s * (p - s)) as f64).collect();
    for w in weight.iter_mut().take(n_paired) {
        *w *= 2.0;
    }
    let total: f64 = weight.iter().sum();
    weight.iter_mut().for_each(|w| *w /= total);

    let full: u64 = (1u64 << p) - 1;
    let mut left = n_coalitions as f64;
    let mut remaining = weight.clone();
    let mut n_full = 0;
    for s in 1..=n_sizes {
        let paired = s <= n_paired;
        let n_subsets = binomial(p, s) * if paired { 2.0 } else { 1.0 };
        if left * remaining[s - 1] / n_subsets < 1.0 - 1e-8 {
            break;
        }
        n_full += 1;
        left -= n_subsets;
        if remaining[s - 1] < 1.0 {
            let scale = 1.0 - remaining[s - 1];
            remaining.iter_mut().for_each(|r| *r /= scale);
        }
        let mut w = weight[s - 1] / binomial(p, s);
        if paired {
            w /= 2.0;
        }
        for_each_subset(p, s, |m| {
            *out.entry(m).or_insert(0.0) += w;
            if paired {
                *out.entry(full ^ m).or_insert(0.0) += w;
            }
        });
    }

    if n_full < n_sizes && left >= 1.0 {
        let mut probs: Vec<f64> = weight.clone();
        for pr in probs.iter_mut().take(n_paired) {
            *pr /= 2.0;
        }
        let probs = &probs[n_full..];
        let z: f64 = probs.iter().sum();
        let mut sampled: BTreeMap<u64, f64> = BTreeMap::new();
        let mut budget = left as usize;
        let mut idx: Vec<usize> = (0..p).collect();
        while budget > 0 {
            let u: f64 = rng.gen::<f64>() * z;
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (k, pr) in probs.iter().enumerate() {
                acc += pr;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            let s = pick + n_full + 1;
            idx.shuffle(rng);
            let m = idx[..s].iter().fold(0u64, |m, &j| m | 1 << j);
            *sampled.entry(m).or_insert(0.0) += 1.0;
            budget -= 1;
            if budget > 0 && s <= n_paired {
                *sampled.entry(full ^ m).or_insert(0.0) += 1.0;
                budget -= 1;
            }
        }
        let weight_left: f64 = weight[n_full..].iter().sum();
        let sum: f64 = sampled.values().sum();
        for (m, w) in sampled {
            *out.entry(m).or_insert(0.0) += w * weight_left / sum;
        }
    }
    out
}

/// Calls `f` with every `k`-subset of `0..p` as a bitmask, in lexicographic order.
fn for_each_subset(p: usize, k: usize, mut f: impl FnMut(u64)) {
    if k > p {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(idx.iter().fold(0u64, |m, &j| m | 1 << j));
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + p - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// KernelSHAP estimate for one instance, with `sum(phi) + base = f(x)`
/// imposed exactly. With `n_coalitions >= 2^p - 2` every coalition is used
/// and the result equals the exact Shapley values.
pub fn shap_sampled<R: Rng>(
    model: &dyn Predictor,
    instance: &[f64],
    background: &[Vec<f64>],
    n_coalitions: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    let vf = ValueFunction::new(model, background)?;
    let p = vf.p;
    if p > MAX_SAMPLED_FEATURES {
        return Err(Error::TooManyFeatures {
            p,
            max: MAX_SAMPLED_FEATURES,
        });
    }
    if instance.len() != p {
        return Err(Error::LengthMismatch(format!("instance has {} features, model {p}", instance.len())));
    }
    if n_coalitions < 2 * p {
        return Err(Error::SingularShapSystem(n_coalitions));
    }
    let full: u64 = (1u64 << p) - 1;
    let ends = vf.values(instance, &[0, full]);
    let (base, fx) = (ends[0], ends[1]);
    let delta = fx - base;
    if p == 1 {
        return Ok((vec![delta], base));
    }
    let coalitions = kernel_coalitions(p, n_coalitions, rng);
    let masks: Vec<u64> = coalitions.keys().copied().collect();
    let weights: Vec<f64> = coalitions.values().copied().collect();
    let v = vf.values(instance, &masks);

    // eliminate the last feature: phi_last = delta - sum(others)
    let q = p - 1;
    let last = 1u64 << q;
    let mut xtwx = DMatrix::<f64>::zeros(q, q);
    let mut xtwy = DVector::<f64>::zeros(q);
    let mut row = vec![0.0; q];
    for ((m, w), vm) in masks.iter().zip(&weights).zip(&v) {
        let z_last = if m & last != 0 { 1.0 } else { 0.0 };
        for (j, r) in row.iter_mut().enumerate() {
            *r = (if m >> j & 1 == 1 { 1.0 } else { 0.0 }) - z_last;
        }
        let y = vm - base - z_last * delta;
        for a in 0..q {
            if row[a] == 0.0 {
                continue;
            }
            xtwy[a] += w * row[a] * y;
            for b in 0..q {
                xtwx[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let sol = xtwx
        .cholesky()
        .ok_or(Error::SingularShapSystem(n_coalitions))?
        .solve(&xtwy);
    let mut phi: Vec<f64> = sol.iter().copied().collect();
    let rest: f64 = phi.iter().sum();
    phi.push(delta - rest);
    Ok((phi, base))
}

/// Attributions for a set of instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMatrix {
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Expected model output over the background.
    pub base_value: f64,
    pub predictions: Vec<f64>,
    pub exact: bool,
}

impl ShapMatrix {
    /// Largest `|sum(phi) + base - f(x)|` over rows.
    pub fn efficiency_gap(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.predictions)
            .map(|(phi, f)| (phi.iter().sum::<f64>() + self.base_value - f).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean_abs(&self) -> Vec<f64> {
        mean_abs_of(&self.values, self.columns.len())
    }
}

fn mean_abs_of(values: &[Vec<f64>], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for r in values {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v.abs();
        }
    }
    let n = values.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Explains every row. Sampled explanations draw from a stream keyed by
/// `(seed, row index)`, so results do not depend on thread scheduling.
pub fn explain(
    model: &dyn Predictor,
    columns: &[String],
    rows: &[Vec<f64>],
    background: &[Vec<f64>],
    settings: &ShapSettings,
    seed: u64,
) -> Result<ShapMatrix> {
    let p = model.input_width();
    if columns.len() != p {
        return Err(Error::LengthMismatch(format!("{} column names for {p} features", columns.len())));
    }
    if rows.is_empty() {
        return Err(Error::domain("no rows to explain"));
    }
    let exact = settings.use_exact(p);
    let results: Vec<(Vec<f64>, f64)> = rows
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if exact {
                shap_exact(model, x, background)
            } else {
                let mut rng = seed::rng_from(seed, &[stream::SHAP, i as u64]);
                shap_sampled(model, x, background, settings.n_coalitions, &mut rng)
            }
        })
        .collect::<Result<_>>()?;
    let base_value = results[0].1;
    Ok(ShapMatrix {
        columns: columns.to_vec(),
        values: results.into_iter().map(|r| r.0).collect(),
        base_value,
        predictions: model.predict(rows),
        exact,
    })
}

/// Per-feature mean of `|phi|` over `rows`.
pub fn mean_abs_shap(
    model: &dyn Predictor,
    rows: &[Vec<f64>],
    background: &[Vec<f64>],
    settings: &ShapSettings,
    seed: u64,
) -> Result<Vec<f64>> {
    let cols: Vec<String> = (0..model.input_width()).map(|j| format!("x{j}")).collect();
    Ok(explain(model, &cols, rows, background, settings, seed)?.mean_abs())
}

/// Ranks of features within one experiment (1 = most important).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankTable {
    pub experiment: ExperimentId,
    pub features: Vec<String>,
    pub ranks: Vec<usize>,
}

impl RankTable {
    /// Accepts any ranks in `1..=n`; computed tables are permutations, but
    /// published tables fed verbatim need not be.
    pub fn new(experiment: ExperimentId, features: Vec<String>, ranks: Vec<usize>) -> Result<Self> {
        let n = features.len();
        if ranks.len() != n {
            return Err(Error::LengthMismatch(format!("{} ranks for {n} features", ranks.len())));
        }
        if ranks.iter().any(|&r| r == 0 || r > n) {
            return Err(Error::domain(format!("ranks must lie in 1..={n}")));
        }
        Ok(RankTable {
            experiment,
            features,
            ranks,
        })
    }

    /// Ranks by decreasing importance; ties keep column order.
    pub fn from_importance(experiment: ExperimentId, features: Vec<String>, importance: &[f64]) -> Result<Self> {
        if importance.len() != features.len() {
            return Err(Error::LengthMismatch("importance vs features".into()));
        }
        let mut order: Vec<usize> = (0..importance.len()).collect();
        order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
        let mut ranks = vec![0; importance.len()];
        for (r, &j) in order.iter().enumerate() {
            ranks[j] = r + 1;
        }
        RankTable::new(experiment, features, ranks)
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.ranks.len()];
        self.ranks.iter().all(|&r| !std::mem::replace(&mut seen[r - 1], true))
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.features.iter().position(|f| f == feature).map(|i| self.ranks[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStability {
    pub feature: String,
    /// Ranks in the order of the input tables.
    pub ranks: Vec<usize>,
    pub min_rank: usize,
    pub max_rank: usize,
    pub top_half_persistent: bool,
    pub bottom_half_persistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub experiments: Vec<ExperimentId>,
    /// Ranks `<= half` form the top half, the rest the bottom half.
    pub half: usize,
    pub features: Vec<FeatureStability>,
    pub n_top_persistent: usize,
    pub n_bottom_persistent: usize,
}

impl StabilityReport {
    pub fn top_persistent(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| f.top_half_persistent)
            .map(|f| f.feature.as_str())
            .collect()
    }

    pub fn bottom_persistent(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| f.bottom_half_persistent)
            .map(|f| f.feature.as_str())
            .collect()
    }
}

/// Which features keep to the top (rank `<= floor(n/2)`) or bottom half
/// in every experiment. Features are reported in the first table's order.
pub fn rank_stability(tables: &[RankTable]) -> Result<StabilityReport> {
    if tables.len() < 2 {
        return Err(Error::domain("rank stability needs at least two experiments"));
    }
    let base = &tables[0];
    let mut sorted = base.features.clone();
    sorted.sort();
    for t in &tables[1..] {
        let mut f = t.features.clone();
        f.sort();
        if f != sorted {
            return Err(Error::Alignment(format!(
                "feature sets of {} and {} differ",
                base.experiment, t.experiment
            )));
        }
    }
    let half = base.features.len() / 2;
    let features: Vec<FeatureStability> = base
        .features
        .iter()
        .map(|name| {
            let ranks: Vec<usize> = tables.iter().map(|t| t.rank_of(name).expect("same feature set")).collect();
            FeatureStability {
                feature: name.clone(),
                min_rank: *ranks.iter().min().expect("non-empty"),
                max_rank: *ranks.iter().max().expect("non-empty"),
                top_half_persistent: ranks.iter().all(|&r| r <= half),
                bottom_half_persistent: ranks.iter().all(|&r| r > half),
                ranks,
            }
        })
        .collect();
    Ok(StabilityReport {
        experiments: tables.iter().map(|t| t.experiment).collect(),
        half,
        n_top_persistent: features.iter().filter(|f| f.top_half_persistent).count(),
        n_bottom_persistent: features.iter().filter(|f| f.bottom_half_persistent).count(),
        features,
    })
}

/// Rows = features (first table's order), columns = experiments from the
/// latest to the earliest id.
pub fn write_rank_csv(path: &Path, tables: &[RankTable]) -> Result<()> {
    let mut order: Vec<&RankTable> = tables.iter().collect();
    order.sort_by(|a, b| b.experiment.cmp(&a.experiment));
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["feature".to_string()];
    header.extend(order.iter().map(|t| t.experiment.to_string()));
    w.write_record(&header)?;
    if let Some(first) = tables.first() {
        for f in &first.features {
            let mut rec = vec![f.clone()];
            rec.extend(order.iter().map(|t| t.rank_of(f).map(|r| r.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Feature importances per named series (e.g. seeds) plus their mean.
pub fn write_importance_csv(path: &Path, features: &[String], series: &[(String, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["feature".to_string()];
    header.extend(series.iter().map(|(n, _)| n.clone()));
    header.push("mean".into());
    w.write_record(&header)?;
    for (j, f) in features.iter().enumerate() {
        let vals: Vec<f64> = series.iter().map(|(_, v)| v[j]).collect();
        let mut rec = vec![f.clone()];
        rec.extend(vals.iter().map(f64::to_string));
        rec.push((vals.iter().sum::<f64>() / vals.len().max(1) as f64).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
