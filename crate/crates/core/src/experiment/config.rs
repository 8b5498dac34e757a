use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attribution::ShapSettings;
use crate::dataset::{ExperimentId, ExperimentWindow};
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::evaluation::Benchmark;
use crate::fundamentals::FundamentalOptions;
use crate::hpo::{SaParams, SamplerKind, SearchSpace, TpeParams};
use crate::market_data::GwColumnMap;
use crate::nn::Regularizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Technical,
    Fundamental,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 2] = [FeatureSet::Technical, FeatureSet::Fundamental];
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Technical => "technical",
            FeatureSet::Fundamental => "fundamental",
        })
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "technical" | "tech" => Ok(FeatureSet::Technical),
            "fundamental" | "fundamentals" | "fund" => Ok(FeatureSet::Fundamental),
            other => Err(Error::config(format!("unknown feature set `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Monthly OHLCV file (`Date,Open,High,Low,Close,Adj Close,Volume`).
    pub prices: PathBuf,
    /// Monthly fundamentals file in the Goyal–Welch layout.
    pub fundamentals: PathBuf,
    pub gw_columns: GwColumnMap,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            prices: PathBuf::from("data/sp500_monthly.csv"),
            fundamentals: PathBuf::from("data/gw_monthly.csv"),
            gw_columns: GwColumnMap::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ShapConfig {
    /// Compute attributions during `run` (the `shap` command always does).
    pub enabled: bool,
    #[serde(flatten)]
    pub settings: ShapSettings,
}


/// Everything a run needs. Loaded from TOML; every field has a default.
///
/// ```toml
/// experiments = ["Exp1"]
/// feature_sets = ["technical"]
/// regularizers = ["dropout"]
/// sampler = "tpe"
/// budget = 50
/// seeds = 5
/// epochs = 200
/// master_seed = 0
///
/// [data]
/// prices = "data/sp500_monthly.csv"
/// fundamentals = "data/gw_monthly.csv"
///
/// [oos_start]
/// Exp1 = "2004-06"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub fundamental_options: FundamentalOptions,
    pub experiments: Vec<ExperimentId>,
    pub feature_sets: Vec<FeatureSet>,
    pub regularizers: Vec<Regularizer>,
    pub sampler: SamplerKind,
    pub budget: usize,
    pub seeds: usize,
    pub epochs: usize,
    pub master_seed: u64,
    /// Repeat the whole search per seed; otherwise search once and retrain
    /// the winning configuration under each further seed.
    pub per_seed_hpo: bool,
    pub benchmark: Benchmark,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    pub out: PathBuf,
    /// Optional search-space file; the standard grid otherwise.
    pub space: Option<PathBuf>,
    /// Out-of-sample start month per experiment, e.g. `Exp1 = "2004-06"`.
    pub oos_start: BTreeMap<String, YearMonth>,
    pub tpe: TpeParams,
    pub sa: SaParams,
    pub shap: ShapConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataConfig::default(),
            fundamental_options: FundamentalOptions::default(),
            experiments: ExperimentId::ALL.to_vec(),
            feature_sets: FeatureSet::ALL.to_vec(),
            regularizers: vec![Regularizer::Dropout, Regularizer::BatchNorm],
            sampler: SamplerKind::Tpe,
            budget: 50,
            seeds: 5,
            epochs: 200,
            master_seed: 0,
            per_seed_hpo: true,
            benchmark: Benchmark::Expanding,
            jobs: 0,
            out: PathBuf::from("out"),
            space: None,
            oos_start: BTreeMap::new(),
            tpe: TpeParams::default(),
            sa: SaParams::default(),
            shap: ShapConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub sampler: Option<SamplerKind>,
    pub budget: Option<usize>,
    pub seeds: Option<usize>,
    pub space: Option<PathBuf>,
    pub per_seed_hpo: Option<bool>,
    pub exact: bool,
}

/// One (experiment, feature set, regularizer) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub experiment: ExperimentId,
    pub features: FeatureSet,
    pub regularizer: Regularizer,
}

impl Cell {
    /// Output directory relative to the run root, e.g. `Exp1/technical_dropout`.
    pub fn rel_dir(&self) -> PathBuf {
        PathBuf::from(self.experiment.to_string()).join(format!("{}_{}", self.features, self.regularizer))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.experiment, self.features, self.regularizer)
    }
}

impl RunConfig {
    /// Parses a TOML file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.prices);
        fix(&mut self.data.fundamentals);
        fix(&mut self.out);
        if let Some(s) = self.space.as_mut() {
            fix(s);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.master_seed = v;
        }
        if let Some(v) = o.jobs {
            self.jobs = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.sampler {
            self.sampler = v;
        }
        if let Some(v) = o.budget {
            self.budget = v;
        }
        if let Some(v) = o.seeds {
            self.seeds = v;
        }
        if let Some(v) = &o.space {
            self.space = Some(v.clone());
        }
        if let Some(v) = o.per_seed_hpo {
            self.per_seed_hpo = v;
        }
        if o.exact {
            self.shap.settings.force_exact = true;
        }
    }

    pub fn window(&self, id: ExperimentId) -> Result<ExperimentWindow> {
        let w = ExperimentWindow::standard(id);
        match self.oos_start.get(&id.to_string()) {
            Some(d) => w.with_oos_start(*d),
            None => Ok(w),
        }
    }

    pub fn search_space(&self, regularizer: Regularizer) -> Result<SearchSpace> {
        match &self.space {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::config(format!("cannot read space file {}: {e}", p.display())))?;
                SearchSpace::from_toml(&text, regularizer, self.epochs)
            }
            None => Ok(SearchSpace::standard(regularizer, self.epochs)),
        }
    }

    /// Cells in a fixed order: experiment, then feature set, then regularizer.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &experiment in &self.experiments {
            for &features in &self.feature_sets {
                for &regularizer in &self.regularizers {
                    out.push(Cell {
                        experiment,
                        features,
                        regularizer,
                    });
                }
            }
        }
        out
    }

    /// Checks everything that can be checked without reading data.
    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() || self.feature_sets.is_empty() || self.regularizers.is_empty() {
            return Err(Error::config("experiments, feature_sets and regularizers must be non-empty"));
        }
        if self.budget == 0 || self.seeds == 0 || self.epochs == 0 {
            return Err(Error::config("budget, seeds and epochs must be positive"));
        }
        for key in self.oos_start.keys() {
            let id: ExperimentId = key.parse()?;
            self.window(id)?;
        }
        for &id in &self.experiments {
            self.window(id)?;
        }
        for &r in &self.regularizers {
            self.search_space(r)?.validate()?;
        }
        self.tpe.validate()?;
        self.sa.validate()?;
        let s = &self.shap.settings;
        if s.background_size == 0 || s.n_coalitions == 0 || s.max_instances == Some(0) {
            return Err(Error::config("shap background_size, n_coalitions and max_instances must be positive"));
        }
        let mut seen = std::collections::BTreeSet::new();
        if !self.cells().iter().all(|c| seen.insert(*c)) {
            return Err(Error::config("duplicate experiment, feature set or regularizer entries"));
        }
        Ok(())
    }
}
