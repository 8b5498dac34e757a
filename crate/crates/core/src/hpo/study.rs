use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sampler::{sa_neighbor, sa_replay, tpe_point, Observation, SaParams, SamplerKind, TpeParams};
use super::space::{Point, SearchSpace};
use crate::dataset::SplitDataset;
use crate::error::{Error, Result};
use crate::nn::{self, EpochRecord, HyperConfig, NetworkState, Predictor};
use crate::seed::{self, stream};

/// Serializes non-finite floats as strings so diverged trials survive JSON.
pub(crate) mod lenient_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// One hyperparameter evaluation.
///
/// Selection reads `validation_mse` only; the test columns are recorded
/// for reporting when a test segment exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed_index: u64,
    pub trial_index: usize,
    pub config: HyperConfig,
    /// Seed of the weight initialization and dropout streams.
    pub seed: u64,
    #[serde(with = "lenient_f64")]
    pub validation_mse: f64,
    #[serde(with = "lenient_f64")]
    pub train_mse: f64,
    pub test_mse: Option<f64>,
    pub best_epoch: Option<usize>,
    pub diverged_at: Option<usize>,
    pub epoch_trace: Vec<EpochRecord>,
}

impl TrialRecord {
    pub fn observation(&self, space: &SearchSpace) -> Result<Observation> {
        let point = space.point_of(&self.config).ok_or_else(|| {
            Error::config(format!(
                "trial {} of seed {} lies outside the search space",
                self.trial_index, self.seed_index
            ))
        })?;
        Ok(Observation {
            point,
            loss: self.validation_mse,
        })
    }
}

/// Minimum validation MSE; ties go to the earlier trial.
pub fn best_trial(trials: &[TrialRecord]) -> Option<&TrialRecord> {
    trials.iter().fold(None, |best: Option<&TrialRecord>, t| match best {
        Some(b) if !(t.validation_mse < b.validation_mse) => Some(b),
        _ if t.validation_mse.is_nan() => best,
        _ => Some(t),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub sampler: SamplerKind,
    pub budget: usize,
    pub master_seed: u64,
    /// Index of this study among repeated seeds.
    pub seed_index: u64,
    pub tpe: TpeParams,
    pub sa: SaParams,
}

impl StudySettings {
    pub fn new(sampler: SamplerKind, budget: usize, master_seed: u64, seed_index: u64) -> Self {
        StudySettings {
            sampler,
            budget,
            master_seed,
            seed_index,
            tpe: TpeParams::default(),
            sa: SaParams::default(),
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        seed::derive(self.master_seed, &[self.seed_index, trial as u64, stream::TRAIN])
    }

    fn sampler_rng(&self, trial: usize) -> seed::Rng {
        seed::rng_from(self.master_seed, &[self.seed_index, trial as u64, stream::SAMPLER])
    }

    fn accept_u(&self, trial: usize) -> f64 {
        use rand::Rng;
        seed::rng_from(self.master_seed, &[self.seed_index, trial as u64, stream::SA_ACCEPT]).gen()
    }

    /// Proposal for the next trial given the completed history (trial order).
    /// A pure function of its inputs, so an interrupted study resumes exactly.
    pub fn propose(&self, space: &SearchSpace, history: &[Observation]) -> Point {
        let trial = history.len();
        let mut rng = self.sampler_rng(trial);
        match self.sampler {
            SamplerKind::Rs => space.sample_point(&mut rng),
            SamplerKind::Tpe => tpe_point(space, history, &self.tpe, &mut rng),
            SamplerKind::Sa => match sa_replay(history, &self.sa, |i| self.accept_u(i)) {
                None => space.sample_point(&mut rng),
                Some(state) => sa_neighbor(space, &state.current, &mut rng),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub settings: StudySettings,
    pub trials: Vec<TrialRecord>,
}

impl Study {
    pub fn best(&self) -> Option<&TrialRecord> {
        best_trial(&self.trials)
    }
}

/// Trains one configuration and records the outcome; divergence scores `+inf`.
pub fn evaluate_trial(
    split: &SplitDataset,
    config: &HyperConfig,
    seed_index: u64,
    trial_index: usize,
    seed: u64,
) -> Result<(TrialRecord, Option<NetworkState>)> {
    match nn::train(config, &split.train, &split.validation, seed) {
        Ok(out) => {
            let test_mse = (!split.test.is_empty())
                .then(|| nn::mse_of(&out.network.predict(&split.test.rows), &split.test.target));
            let train_mse = out.history[out.best_epoch - 1].train_mse;
            let rec = TrialRecord {
                seed_index,
                trial_index,
                config: *config,
                seed,
                validation_mse: out.best_validation_mse,
                train_mse,
                test_mse,
                best_epoch: Some(out.best_epoch),
                diverged_at: None,
                epoch_trace: out.history,
            };
            Ok((rec, Some(out.network)))
        }
        Err(Error::Diverged { epoch }) => Ok((
            TrialRecord {
                seed_index,
                trial_index,
                config: *config,
                seed,
                validation_mse: f64::INFINITY,
                train_mse: f64::INFINITY,
                test_mse: None,
                best_epoch: None,
                diverged_at: Some(epoch),
                epoch_trace: Vec::new(),
            },
            None,
        )),
        Err(e) => Err(e),
    }
}

/// Outcome of [`run_study`]: the study plus the network of its best trial.
#[derive(Debug, Clone)]
pub struct StudyResult {
    pub study: Study,
    pub best_network: Option<NetworkState>,
}

/// Runs `settings.budget` trials sequentially, continuing after any trials
/// in `completed` (which must be the leading trials of this very study, as
/// read back from its log). `on_trial` sees each new record in order.
pub fn run_study(
    split: &SplitDataset,
    space: &SearchSpace,
    settings: &StudySettings,
    completed: &[TrialRecord],
    mut on_trial: impl FnMut(&TrialRecord) -> Result<()>,
) -> Result<StudyResult> {
    if settings.budget == 0 {
        return Err(Error::config("budget must be at least 1"));
    }
    space.validate()?;
    settings.tpe.validate()?;
    settings.sa.validate()?;
    let mut trials: Vec<TrialRecord> = Vec::with_capacity(settings.budget);
    let mut history: Vec<Observation> = Vec::with_capacity(settings.budget);
    for rec in completed.iter().take(settings.budget) {
        let expected = settings.propose(space, &history);
        let obs = rec.observation(space)?;
        if rec.trial_index != trials.len() || rec.seed_index != settings.seed_index || obs.point != expected {
            return Err(Error::config(format!(
                "study log entry (seed {}, trial {}) does not match this configuration",
                rec.seed_index, rec.trial_index
            )));
        }
        history.push(obs);
        trials.push(rec.clone());
    }
    let mut best_network: Option<(usize, NetworkState)> = None;
    while trials.len() < settings.budget {
        let k = trials.len();
        let point = settings.propose(space, &history);
        let config = space.config_at(&point);
        let (rec, net) = evaluate_trial(split, &config, settings.seed_index, k, settings.trial_seed(k))?;
        log::debug!(
            "seed {} trial {k}: validation mse {:.6e} ({:?})",
            settings.seed_index,
            rec.validation_mse,
            config
        );
        on_trial(&rec)?;
        if let Some(net) = net {
            let improves = best_trial(&trials).is_none_or(|b| rec.validation_mse < b.validation_mse);
            if improves {
                best_network = Some((k, net));
            }
        }
        history.push(Observation {
            point,
            loss: rec.validation_mse,
        });
        trials.push(rec);
    }
    let study = Study {
        settings: *settings,
        trials,
    };
    let best_network = match (study.best(), best_network) {
        (Some(b), Some((k, net))) if b.trial_index == k => Some(net),
        (Some(b), _) if b.validation_mse.is_finite() => Some(retrain(split, b)?),
        _ => None,
    };
    Ok(StudyResult { study, best_network })
}

/// Reproduces the network of a recorded trial from its configuration and seed.
pub fn retrain(split: &SplitDataset, trial: &TrialRecord) -> Result<NetworkState> {
    Ok(nn::train(&trial.config, &split.train, &split.validation, trial.seed)?.network)
}

/// Appends records to a JSON-lines study log.
pub struct StudyLog {
    file: File,
}

impl StudyLog {
    pub fn append_to(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(StudyLog { file })
    }

    pub fn write(&mut self, rec: &TrialRecord) -> Result<()> {
        let line = serde_json::to_string(rec)?;
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        Ok(())
    }
}

/// Reads a study log, ignoring a truncated final line left by a crash.
pub fn read_study_log(path: &Path) -> Result<Vec<TrialRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TrialRecord>(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => log::warn!("{}: dropping truncated last line", path.display()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Rewrites a log with records sorted by (seed index, trial index).
pub fn write_study_log(path: &Path, trials: &[TrialRecord]) -> Result<()> {
    let mut sorted: Vec<&TrialRecord> = trials.iter().collect();
    sorted.sort_by_key(|t| (t.seed_index, t.trial_index));
    let mut text = String::new();
    for t in sorted {
        text.push_str(&serde_json::to_string(t)?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Leading trials `0, 1, ..` of `seed_index` found in a log, in order.
pub fn completed_prefix(log: &[TrialRecord], seed_index: u64) -> Vec<TrialRecord> {
    let mut mine: Vec<&TrialRecord> = log.iter().filter(|t| t.seed_index == seed_index).collect();
    mine.sort_by_key(|t| t.trial_index);
    mine.dedup_by_key(|t| t.trial_index);
    mine.into_iter()
        .enumerate()
        .take_while(|(i, t)| t.trial_index == *i)
        .map(|(_, t)| t.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(trial: usize, loss: f64) -> TrialRecord {
        TrialRecord {
            seed_index: 0,
            trial_index: trial,
            config: HyperConfig::default(),
            seed: 1,
            validation_mse: loss,
            train_mse: loss,
            test_mse: None,
            best_epoch: None,
            diverged_at: None,
            epoch_trace: vec![],
        }
    }

    #[test]
    fn best_ignores_nan_and_prefers_earlier() {
        let t = vec![rec(0, f64::NAN), rec(1, 2.0), rec(2, 1.0), rec(3, 1.0), rec(4, f64::INFINITY)];
        assert_eq!(best_trial(&t).unwrap().trial_index, 2);
        assert!(best_trial(&[]).is_none());
        assert_eq!(best_trial(&[rec(0, f64::INFINITY)]).unwrap().trial_index, 0);
    }

    #[test]
    fn infinite_loss_round_trips() {
        let r = rec(0, f64::INFINITY);
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"inf\""));
        let back: TrialRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back.validation_mse, f64::INFINITY);
    }

    #[test]
    fn prefix_stops_at_gap() {
        let log = vec![rec(0, 1.0), rec(2, 1.0), rec(1, 1.0), rec(4, 1.0)];
        let p = completed_prefix(&log, 0);
        assert_eq!(p.iter().map(|t| t.trial_index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(completed_prefix(&log, 1).is_empty());
    }
}
