//! Hyperparameter search over a categorical grid.
//!
//! Three samplers share one study loop: a tree-structured Parzen estimator,
//! simulated annealing and uniform random search. Every proposal is a pure
//! function of the completed history and a seed derived from
//! `(master seed, seed index, trial index)`, so a study interrupted at any
//! point resumes to the same trial sequence.

mod sampler;
mod space;
mod study;

use rand::Rng;

pub use sampler::{
    initial_temperature, sa_accept, sa_neighbor, sa_replay, tpe_point, Observation, SaParams, SaState, SamplerKind,
    TpeParams,
};
pub use space::{Dim, Point, SearchSpace};
pub use study::{
    best_trial, completed_prefix, evaluate_trial, read_study_log, retrain, run_study, write_study_log, Study,
    StudyLog, StudyResult, StudySettings, TrialRecord,
};

use crate::error::{Error, Result};
use crate::nn::HyperConfig;

pub fn sample_random<R: Rng>(space: &SearchSpace, rng: &mut R) -> HyperConfig {
    space.config_at(&space.sample_point(rng))
}

pub fn sample_tpe<R: Rng>(space: &SearchSpace, history: &[TrialRecord], rng: &mut R, params: &TpeParams) -> Result<HyperConfig> {
    let obs = history.iter().map(|t| t.observation(space)).collect::<Result<Vec<_>>>()?;
    Ok(space.config_at(&tpe_point(space, &obs, params, rng)))
}

/// Neighbor of `current`. The temperature only matters to the acceptance
/// step of the study loop but must be positive.
pub fn sample_sa<R: Rng>(space: &SearchSpace, current: &TrialRecord, temperature: f64, rng: &mut R) -> Result<HyperConfig> {
    if !(temperature > 0.0) {
        return Err(Error::domain("annealing temperature must be positive"));
    }
    let p = current.observation(space)?.point;
    Ok(space.config_at(&sa_neighbor(space, &p, rng)))
}
