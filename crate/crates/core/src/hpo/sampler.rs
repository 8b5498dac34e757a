use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::space::{Point, SearchSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Tpe,
    Sa,
    Rs,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Tpe => "tpe",
            SamplerKind::Sa => "sa",
            SamplerKind::Rs => "rs",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tpe" => Ok(SamplerKind::Tpe),
            "sa" | "anneal" => Ok(SamplerKind::Sa),
            "rs" | "random" => Ok(SamplerKind::Rs),
            other => Err(Error::config(format!("unknown sampler `{other}` (expected tpe, sa or rs)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeParams {
    /// Fraction of the history (by validation loss) forming the good set.
    pub gamma: f64,
    pub n_candidates: usize,
    /// Pseudo-count added to every category of both densities.
    pub prior_weight: f64,
    /// Trials drawn uniformly before the densities are used.
    pub n_startup: usize,
}

impl Default for TpeParams {
    fn default() -> Self {
        TpeParams {
            gamma: 0.25,
            n_candidates: 24,
            prior_weight: 1.0,
            n_startup: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    /// Uniform warm-up trials; their loss spread sets the initial temperature.
    pub n_warmup: usize,
    pub cooling: f64,
    /// Fixed initial temperature instead of the warm-up estimate.
    pub initial_temperature: Option<f64>,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            n_warmup: 10,
            cooling: 0.95,
            initial_temperature: None,
        }
    }
}

impl TpeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || self.n_candidates == 0 || !(self.prior_weight > 0.0) {
            return Err(Error::config("tpe needs 0 < gamma <= 1, n_candidates >= 1, prior_weight > 0"));
        }
        Ok(())
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cooling > 0.0 && self.cooling <= 1.0) {
            return Err(Error::config("sa cooling must lie in (0, 1]"));
        }
        if self.initial_temperature.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::config("sa initial temperature must be positive"));
        }
        Ok(())
    }
}

/// A completed evaluation as seen by the samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub point: Point,
    /// Validation loss; `+inf` for diverged trials.
    pub loss: f64,
}

/// Smoothed category frequencies of one dimension.
fn density(obs: &[&Observation], dim: usize, k: usize, prior_weight: f64) -> Vec<f64> {
    let mut w = vec![prior_weight; k];
    for o in obs {
        w[o.point[dim]] += 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

fn draw_categorical<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Indices of `history` sorted by loss, ties by position; NaN sorts last.
fn ranked(history: &[Observation]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..history.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (history[a].loss, history[b].loss);
        x.partial_cmp(&y)
            .unwrap_or_else(|| x.is_nan().cmp(&y.is_nan()))
            .then(a.cmp(&b))
    });
    idx
}

/// Categorical tree-structured Parzen estimator proposal.
///
/// The first `ceil(gamma * n)` observations by loss form the good set; every
/// dimension gets independent smoothed frequency tables `l` (good) and `g`
/// (rest). Candidates are drawn from `l` and the one maximizing
/// `sum(log l - log g)` is returned (first wins on ties).
pub fn tpe_point<R: Rng>(space: &SearchSpace, history: &[Observation], params: &TpeParams, rng: &mut R) -> Point {
    let card = space.cardinalities();
    if history.is_empty() || history.len() < params.n_startup {
        return space.sample_point(rng);
    }
    let order = ranked(history);
    let n_good = ((params.gamma * history.len() as f64).ceil() as usize).clamp(1, history.len());
    let good: Vec<&Observation> = order[..n_good].iter().map(|&i| &history[i]).collect();
    let bad: Vec<&Observation> = order[n_good..].iter().map(|&i| &history[i]).collect();
    let l: Vec<Vec<f64>> = card
        .iter()
        .enumerate()
        .map(|(d, &k)| density(&good, d, k, params.prior_weight))
        .collect();
    let g: Vec<Vec<f64>> = card
        .iter()
        .enumerate()
        .map(|(d, &k)| density(&bad, d, k, params.prior_weight))
        .collect();
    let mut best: Option<(f64, Point)> = None;
    for _ in 0..params.n_candidates {
        let cand: Point = l.iter().map(|p| draw_categorical(p, rng)).collect();
        let score: f64 = cand
            .iter()
            .enumerate()
            .map(|(d, &c)| l[d][c].ln() - g[d][c].ln())
            .sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cand));
        }
    }
    best.expect("n_candidates >= 1").1
}

/// Changes one uniformly chosen dimension (among those with more than one
/// choice) to a different uniformly chosen value. Returns the input
/// unchanged when no dimension can move.
pub fn sa_neighbor<R: Rng>(space: &SearchSpace, current: &[usize], rng: &mut R) -> Point {
    let card = space.cardinalities();
    let movable: Vec<usize> = (0..card.len()).filter(|&d| card[d] > 1).collect();
    let mut out = current.to_vec();
    if movable.is_empty() {
        return out;
    }
    let d = movable[rng.gen_range(0..movable.len())];
    let step = rng.gen_range(1..card[d]);
    out[d] = (current[d] + step) % card[d];
    out
}

/// Metropolis rule: improvements always pass, otherwise pass when
/// `u < exp(-delta / temperature)`.
pub fn sa_accept(delta: f64, temperature: f64, u: f64) -> bool {
    if delta.is_nan() {
        return false;
    }
    if delta <= 0.0 {
        return true;
    }
    u < (-delta / temperature).exp()
}

/// Temperature from the warm-up losses: their sample standard deviation,
/// falling back to a tenth of their mean magnitude (or 1) when that is
/// zero or undefined.
pub fn initial_temperature(warmup: &[f64]) -> f64 {
    let finite: Vec<f64> = warmup.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() >= 2 {
        let n = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / n;
        let sd = (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if sd > 0.0 && sd.is_finite() {
            return sd;
        }
    }
    let mag = finite.iter().map(|v| v.abs()).sum::<f64>() / finite.len().max(1) as f64;
    if mag > 0.0 && mag.is_finite() {
        0.1 * mag
    } else {
        1.0
    }
}

/// Annealing state after replaying `history`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaState {
    pub current: Point,
    pub current_loss: f64,
    /// Temperature that applies to the next proposal.
    pub temperature: f64,
}

/// Replays the chain over a history whose first `n_warmup` entries are the
/// warm-up. `accept_u(i)` is the uniform draw used when judging entry `i`.
/// `None` while still warming up.
pub fn sa_replay(history: &[Observation], params: &SaParams, accept_u: impl Fn(usize) -> f64) -> Option<SaState> {
    let warm = params.n_warmup.max(1);
    if history.len() < warm {
        return None;
    }
    let order = ranked(&history[..warm]);
    let start = &history[order[0]];
    let losses: Vec<f64> = history[..warm].iter().map(|o| o.loss).collect();
    let t0 = params.initial_temperature.unwrap_or_else(|| initial_temperature(&losses));
    let mut state = SaState {
        current: start.point.clone(),
        current_loss: start.loss,
        temperature: t0,
    };
    for (i, o) in history.iter().enumerate().skip(warm) {
        let delta = o.loss - state.current_loss;
        if sa_accept(delta, state.temperature, accept_u(i)) {
            state.current = o.point.clone();
            state.current_loss = o.loss;
        }
        state.temperature *= params.cooling;
    }
    Some(state)
}
