use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Cell, FeatureSet, RunConfig};
use super::report::{write_report, ReportSummary};
use crate::attribution::{
    evenly_spaced, explain, rank_stability, write_importance_csv, write_rank_csv, RankTable, ShapInstances,
};
use crate::dataset::{make_supervised, split, FeatureMatrix, FeatureTable, SplitDataset};
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, evaluate_model, write_eval_csv, write_forecasts_csv, EvalReport, ForecastSeries, Variant};
use crate::fundamentals::build_fundamentals;
use crate::hpo::{
    completed_prefix, read_study_log, retrain, run_study, write_study_log, StudyLog, StudySettings, TrialRecord,
};
use crate::market_data::{log_returns, parse_gw_csv, parse_ohlcv_csv, price_and_volume, MonthlySeries, Span};
use crate::nn::{self, ModelFile, NetworkState, MODEL_SCHEMA_VERSION};
use crate::seed::{self, stream};
use crate::technical::full_technical_set;

/// Parsed inputs shared by every cell.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub returns: MonthlySeries,
    pub tables: BTreeMap<FeatureSet, FeatureTable>,
}

impl LoadedData {
    pub fn load(cfg: &RunConfig, sets: &[FeatureSet]) -> Result<Self> {
        let bars = parse_ohlcv_csv(&cfg.data.prices)?;
        let (prices, volumes) = price_and_volume(&bars)?;
        let returns = log_returns(&prices)?;
        let mut tables = BTreeMap::new();
        for &set in sets {
            let table = match set {
                FeatureSet::Technical => full_technical_set(&prices, &volumes)?,
                FeatureSet::Fundamental => {
                    let raw = parse_gw_csv(&cfg.data.fundamentals, &cfg.data.gw_columns, Span::default())?;
                    build_fundamentals(&raw, cfg.fundamental_options)?.to_table()?
                }
            };
            tables.insert(set, table);
        }
        Ok(LoadedData { returns, tables })
    }

    pub fn supervised(&self, set: FeatureSet) -> Result<FeatureMatrix> {
        let table = self
            .tables
            .get(&set)
            .ok_or_else(|| Error::config(format!("feature set {set} was not loaded")))?;
        make_supervised(table, &self.returns)
    }

    pub fn split_for(&self, cfg: &RunConfig, cell: &Cell) -> Result<SplitDataset> {
        split(&self.supervised(cell.features)?, &cfg.window(cell.experiment)?)
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes the feature tables of every configured feature set into `dir`.
pub fn cmd_features(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = LoadedData::load(cfg, &cfg.feature_sets)?;
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (set, table) in &data.tables {
        let path = dir.join(format!("{set}.csv"));
        table.write_csv(fs::File::create(&path)?)?;
        out.push(path);
    }
    Ok(out)
}

/// Final model of one seed within a cell.
struct SeedModel {
    seed_index: u64,
    trial: TrialRecord,
    network: NetworkState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub cell: Cell,
    pub error: Option<String>,
    /// Trainings performed by this invocation (resumed trials excluded).
    #[serde(skip)]
    pub trained: usize,
    #[serde(skip)]
    pub seconds: f64,
}

/// Per-run status: one entry per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub cells: Vec<CellOutcome>,
}

impl RunSummary {
    pub fn failed(&self) -> Vec<&CellOutcome> {
        self.cells.iter().filter(|c| c.error.is_some()).collect()
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    started_unix: u64,
    finished_unix: u64,
    wall_seconds: f64,
    version: &'a str,
    cells: Vec<CellTiming>,
}

#[derive(Serialize)]
struct CellTiming {
    cell: String,
    seconds: f64,
    trained: usize,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Resolved configuration plus derived defaults, echoed into every run.
#[derive(Serialize)]
struct ResolvedConfig {
    /// Output directory is blanked so trees written to different places compare equal.
    config: RunConfig,
    windows: Vec<crate::dataset::ExperimentWindow>,
    search_space_sizes: BTreeMap<String, usize>,
}

/// Runs every cell of the matrix. Cells fail independently; the returned
/// summary lists failures. Errors are returned only for problems that stop
/// the whole run (invalid configuration, unreadable data).
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let started = unix_now();
    let clock = Instant::now();
    let data = LoadedData::load(cfg, &cfg.feature_sets)?;
    fs::create_dir_all(&cfg.out)?;
    let windows = cfg.experiments.iter().map(|&e| cfg.window(e)).collect::<Result<Vec<_>>>()?;
    let sizes = cfg
        .regularizers
        .iter()
        .map(|&r| Ok((r.to_string(), cfg.search_space(r)?.size())))
        .collect::<Result<BTreeMap<_, _>>>()?;
    write_json(
        &cfg.out.join("config_resolved.json"),
        &ResolvedConfig {
            config: RunConfig {
                out: PathBuf::new(),
                ..cfg.clone()
            },
            windows,
            search_space_sizes: sizes,
        },
    )?;

    let pool = thread_pool(cfg.jobs)?;
    let cells = cfg.cells();
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let t = Instant::now();
                let res = run_cell(cfg, &data, cell);
                let (trained, error) = match res {
                    Ok(n) => (n, None),
                    Err(e) => {
                        log::error!("{cell}: {e}");
                        (0, Some(e.to_string()))
                    }
                };
                CellOutcome {
                    cell: *cell,
                    error,
                    trained,
                    seconds: t.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });

    if cfg.shap.enabled {
        write_rank_tables(cfg)?;
    }
    let summary = RunSummary { cells: outcomes };
    write_json(&cfg.out.join("status.json"), &summary)?;
    let report: ReportSummary = write_report(&cfg.out)?;
    log::info!("report: {} rows, {} missing", report.rows.len(), report.missing.len());
    write_json(
        &cfg.out.join("metadata.json"),
        &Metadata {
            started_unix: started,
            finished_unix: unix_now(),
            wall_seconds: clock.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION"),
            cells: summary
                .cells
                .iter()
                .map(|c| CellTiming {
                    cell: c.cell.to_string(),
                    seconds: c.seconds,
                    trained: c.trained,
                })
                .collect(),
        },
    )?;
    Ok(summary)
}

fn seed_settings(cfg: &RunConfig, seed_index: u64) -> StudySettings {
    StudySettings {
        tpe: cfg.tpe,
        sa: cfg.sa,
        ..StudySettings::new(cfg.sampler, cfg.budget, cfg.master_seed, seed_index)
    }
}

/// Runs one cell; returns the number of trainings performed.
fn run_cell(cfg: &RunConfig, data: &LoadedData, cell: &Cell) -> Result<usize> {
    let dir = cfg.out.join(cell.rel_dir());
    fs::create_dir_all(&dir)?;
    let split = data.split_for(cfg, cell)?;
    let space = cfg.search_space(cell.regularizer)?;
    let log_path = dir.join("study.jsonl");
    let previous = read_study_log(&log_path)?;
    let log = Mutex::new(StudyLog::append_to(&log_path)?);
    let trained = Mutex::new(0usize);

    let hpo_seeds: Vec<u64> = if cfg.per_seed_hpo {
        (0..cfg.seeds as u64).collect()
    } else {
        vec![0]
    };
    let studies = hpo_seeds
        .par_iter()
        .map(|&k| {
            let settings = seed_settings(cfg, k);
            let done = completed_prefix(&previous, k);
            let res = run_study(&split, &space, &settings, &done, |rec| {
                *trained.lock().expect("counter") += 1;
                log.lock().expect("study log").write(rec)
            })?;
            Ok(res)
        })
        .collect::<Result<Vec<_>>>()?;
    drop(log);

    let mut all_trials: Vec<TrialRecord> = Vec::new();
    let mut models: Vec<SeedModel> = Vec::new();
    for res in &studies {
        all_trials.extend(res.study.trials.iter().cloned());
        let best = res.study.best().ok_or_else(|| Error::domain("empty study"))?;
        let net = res.best_network.clone().ok_or_else(|| {
            Error::Diverged {
                epoch: best.diverged_at.unwrap_or(0),
            }
        })?;
        models.push(SeedModel {
            seed_index: res.study.settings.seed_index,
            trial: best.clone(),
            network: net,
        });
    }
    if !cfg.per_seed_hpo {
        let winner = models[0].trial.clone();
        let extra: Vec<Result<SeedModel>> = (1..cfg.seeds as u64)
            .into_par_iter()
            .map(|k| {
                let s = seed::derive(cfg.master_seed, &[k, u64::MAX, stream::TRAIN]);
                let out = nn::train(&winner.config, &split.train, &split.validation, s)?;
                let mut trial = winner.clone();
                trial.seed_index = k;
                trial.seed = s;
                trial.validation_mse = out.best_validation_mse;
                trial.best_epoch = Some(out.best_epoch);
                trial.epoch_trace = out.history;
                Ok(SeedModel {
                    seed_index: k,
                    trial,
                    network: out.network,
                })
            })
            .collect();
        *trained.lock().expect("counter") += extra.len();
        for m in extra {
            models.push(m?);
        }
    }
    write_study_log(&log_path, &all_trials)?;

    let variant = Variant::network(cell.regularizer, &cell.features.to_string());
    let mut per_seed = Vec::new();
    let mut forecasts: Vec<(u64, ForecastSeries)> = Vec::new();
    for m in &models {
        let (metrics, f) = evaluate_model(&m.network, &split, &data.returns, cfg.benchmark, m.seed_index)?;
        per_seed.push(metrics);
        if let Some(f) = f {
            forecasts.push((m.seed_index, f));
        }
        let model_file = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            config: m.trial.config,
            columns: split.train.columns.clone(),
            seed: m.trial.seed,
            network: m.network.clone(),
            scaler: split.scaler.clone(),
            split: split.boundaries(),
        };
        fs::write(dir.join(format!("model_seed{}.json", m.seed_index)), model_file.to_json()? + "\n")?;
    }
    let report = aggregate(cell.experiment, variant, per_seed)?;
    write_eval(&dir, &report, &models)?;
    write_forecasts_csv(&dir.join("forecasts.csv"), &forecasts)?;
    write_trajectory(&dir.join("trajectory.csv"), &studies.iter().map(|s| s.study.trials.clone()).collect::<Vec<_>>())?;

    if cfg.shap.enabled {
        let nets: Vec<(u64, NetworkState)> = models.iter().map(|m| (m.seed_index, m.network.clone())).collect();
        shap_cell(cfg, cell, &split, &nets, &dir)?;
    }
    let n = *trained.lock().expect("counter");
    Ok(n)
}

#[derive(Serialize, Deserialize)]
struct EvalFile {
    report: EvalReport,
    /// Configuration selected for each seed.
    selected: Vec<TrialRecord>,
}

fn write_eval(dir: &Path, report: &EvalReport, models: &[SeedModel]) -> Result<()> {
    write_eval_csv(&dir.join("eval.csv"), std::slice::from_ref(report))?;
    let selected = models
        .iter()
        .map(|m| TrialRecord {
            epoch_trace: Vec::new(),
            ..m.trial.clone()
        })
        .collect();
    write_json(
        &dir.join("eval.json"),
        &EvalFile {
            report: report.clone(),
            selected,
        },
    )
}

pub(crate) fn read_eval_report(path: &Path) -> Result<EvalReport> {
    let f: EvalFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(f.report)
}

fn mean_sd_finite(xs: &[f64]) -> (Option<f64>, Option<f64>, usize) {
    let v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (None, None, 0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(m), Some(sd), v.len())
}

/// Per-evaluation error trajectories across seeds: the trial's own train,
/// validation and test MSE and the best validation MSE found so far.
fn write_trajectory(path: &Path, studies: &[Vec<TrialRecord>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "evaluation",
        "n_finite",
        "train_mse_mean",
        "train_mse_sd",
        "validation_mse_mean",
        "validation_mse_sd",
        "test_mse_mean",
        "test_mse_sd",
        "best_validation_mse_mean",
        "best_validation_mse_sd",
    ])?;
    let n = studies.iter().map(Vec::len).max().unwrap_or(0);
    let mut running: Vec<f64> = vec![f64::INFINITY; studies.len()];
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for k in 0..n {
        let at: Vec<&TrialRecord> = studies.iter().filter_map(|s| s.get(k)).collect();
        for (r, s) in running.iter_mut().zip(studies) {
            if let Some(t) = s.get(k) {
                if t.validation_mse < *r {
                    *r = t.validation_mse;
                }
            }
        }
        let (tr, tr_sd, n_fin) = mean_sd_finite(&at.iter().map(|t| t.train_mse).collect::<Vec<_>>());
        let (va, va_sd, _) = mean_sd_finite(&at.iter().map(|t| t.validation_mse).collect::<Vec<_>>());
        let (te, te_sd, _) = mean_sd_finite(&at.iter().map(|t| t.test_mse.unwrap_or(f64::NAN)).collect::<Vec<_>>());
        let (bv, bv_sd, _) = mean_sd_finite(&running);
        w.write_record([
            (k + 1).to_string(),
            n_fin.to_string(),
            opt(tr),
            opt(tr_sd),
            opt(va),
            opt(va_sd),
            opt(te),
            opt(te_sd),
            opt(bv),
            opt(bv_sd),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean-|SHAP| importances per seed for one cell; writes
/// `shap_importance.csv` and `shap_rank.csv`. Returns the mean importance.
fn shap_cell(cfg: &RunConfig, cell: &Cell, split: &SplitDataset, nets: &[(u64, NetworkState)], dir: &Path) -> Result<Vec<f64>> {
    let s = &cfg.shap.settings;
    let background = evenly_spaced(&split.train.rows, s.background_size);
    let rows = match s.instances {
        ShapInstances::Test if !split.test.is_empty() => split.test.rows.clone(),
        ShapInstances::Test => return Err(Error::domain("no test rows to explain")),
        ShapInstances::InSample => split.in_sample().rows,
    };
    let rows = match s.max_instances {
        Some(k) => evenly_spaced(&rows, k),
        None => rows,
    };
    let columns = split.train.columns.clone();
    let mut series = Vec::new();
    for (k, net) in nets {
        let shap_seed = seed::derive(cfg.master_seed, &[*k, stream::SHAP]);
        let m = explain(net, &columns, &rows, &background, s, shap_seed)?;
        series.push((format!("seed{k}"), m.mean_abs()));
    }
    let p = columns.len();
    let mean: Vec<f64> = (0..p)
        .map(|j| series.iter().map(|(_, v)| v[j]).sum::<f64>() / series.len() as f64)
        .collect();
    write_importance_csv(&dir.join("shap_importance.csv"), &columns, &series)?;
    let table = RankTable::from_importance(cell.experiment, columns, &mean)?;
    write_rank_csv(&dir.join("shap_rank.csv"), &[table])?;
    Ok(mean)
}

fn read_rank_column(path: &Path, cell: &Cell) -> Result<RankTable> {
    let mut r = csv::Reader::from_path(path)?;
    let mut features = Vec::new();
    let mut ranks = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        features.push(rec[0].to_string());
        ranks.push(
            rec[1]
                .parse()
                .map_err(|_| Error::domain(format!("{}: bad rank", path.display())))?,
        );
    }
    RankTable::new(cell.experiment, features, ranks)
}

/// Table-4-style rank CSVs per (feature set, regularizer) across experiments,
/// plus persistence flags when two or more experiments are present.
fn write_rank_tables(cfg: &RunConfig) -> Result<()> {
    for &features in &cfg.feature_sets {
        for &regularizer in &cfg.regularizers {
            let mut tables = Vec::new();
            for &experiment in &cfg.experiments {
                let cell = Cell {
                    experiment,
                    features,
                    regularizer,
                };
                let path = cfg.out.join(cell.rel_dir()).join("shap_rank.csv");
                if path.exists() {
                    tables.push(read_rank_column(&path, &cell)?);
                }
            }
            if tables.is_empty() {
                continue;
            }
            let stem = format!("ranks_{features}_{regularizer}");
            write_rank_csv(&cfg.out.join(format!("{stem}.csv")), &tables)?;
            if tables.len() >= 2 {
                write_json(&cfg.out.join(format!("{stem}_stability.json")), &rank_stability(&tables)?)?;
            }
        }
    }
    Ok(())
}

/// Recomputes attributions from saved models of a finished run.
pub fn cmd_shap(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let data = LoadedData::load(cfg, &cfg.feature_sets)?;
    let pool = thread_pool(cfg.jobs)?;
    let cells = cfg.cells();
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .iter()
            .map(|cell| {
                let t = Instant::now();
                let res = (|| -> Result<()> {
                    let dir = cfg.out.join(cell.rel_dir());
                    let split = data.split_for(cfg, cell)?;
                    let mut nets = Vec::new();
                    // every seed the run saved, whatever `seeds` says now
                    for k in 0u64.. {
                        let path = dir.join(format!("model_seed{k}.json"));
                        if !path.is_file() {
                            break;
                        }
                        let text = fs::read_to_string(&path)?;
                        let m = ModelFile::from_json(&text)?;
                        if m.columns != split.train.columns || m.scaler != split.scaler {
                            return Err(Error::config(format!(
                                "{} was trained on different data or settings",
                                path.display()
                            )));
                        }
                        nets.push((k, m.network));
                    }
                    if nets.is_empty() {
                        return Err(Error::config(format!("no saved models under {}", dir.display())));
                    }
                    shap_cell(cfg, cell, &split, &nets, &dir)?;
                    Ok(())
                })();
                CellOutcome {
                    cell: *cell,
                    error: res.err().map(|e| {
                        log::error!("{cell}: {e}");
                        e.to_string()
                    }),
                    trained: 0,
                    seconds: t.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });
    write_rank_tables(cfg)?;
    Ok(RunSummary { cells: outcomes })
}

/// Network of a recorded trial (used by callers that only kept the log).
pub fn rebuild_network(split: &SplitDataset, trial: &TrialRecord) -> Result<NetworkState> {
    retrain(split, trial)
}
