use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stockhpo::error::Error;
use stockhpo::experiment::{cmd_features, cmd_run, cmd_shap, write_report, Overrides, RunConfig, RunSummary};
use stockhpo::hpo::SamplerKind;

const EXIT_CELL_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Hyperparameter search and evaluation of equity premium forecasting networks.
#[derive(Parser, Debug)]
#[command(name = "stockhpo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the feature matrices and write them as CSV under `<out>/features`.
    Features(Common),
    /// Run the full experiment matrix (resumes from existing study logs).
    Run(Common),
    /// Summarize a finished or partial run directory.
    Report {
        /// Run directory; defaults to `--out` or the config's output directory.
        dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute SHAP attributions from the saved models of a run.
    Shap(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML configuration file; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// tpe, sa or rs.
    #[arg(long, global = true)]
    sampler: Option<SamplerKind>,
    /// Function evaluations per study.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Number of random seeds.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Search space TOML replacing the standard grid.
    #[arg(long, global = true)]
    space: Option<PathBuf>,
    /// Search separately for every seed (true) or once and retrain (false).
    #[arg(long, global = true)]
    per_seed_hpo: Option<bool>,
    /// Force exact Shapley enumeration.
    #[arg(long, global = true)]
    exact: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            jobs: self.jobs,
            out: self.out.clone(),
            sampler: self.sampler,
            budget: self.budget,
            seeds: self.seeds,
            space: self.space.clone(),
            per_seed_hpo: self.per_seed_hpo,
            exact: self.exact,
        }
    }

    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_for(err: &Error) -> ExitCode {
    log::error!("{err}");
    match err {
        Error::Config(_) | Error::Toml(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_CELL_FAILED),
    }
}

fn finish(summary: RunSummary) -> ExitCode {
    let failed = summary.failed();
    if failed.is_empty() {
        return ExitCode::SUCCESS;
    }
    for c in failed {
        eprintln!("cell {} failed: {}", c.cell, c.error.as_deref().unwrap_or(""));
    }
    ExitCode::from(EXIT_CELL_FAILED)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Features(c) => c.load().and_then(|cfg| {
            let files = cmd_features(&cfg, &cfg.out.join("features"))?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }),
        Command::Run(c) => c.load().and_then(|cfg| cmd_run(&cfg).map(finish)),
        Command::Shap(c) => c.load().and_then(|cfg| cmd_shap(&cfg).map(finish)),
        Command::Report { dir, common } => {
            let dir = match dir {
                Some(d) => Ok(d.clone()),
                None => common.load().map(|cfg| cfg.out),
            };
            dir.and_then(|d| write_report(&d)).map(|s| {
                println!("{} rows, {} missing cells", s.rows.len(), s.missing.len());
                ExitCode::SUCCESS
            })
        }
    };
    res.unwrap_or_else(|e| exit_for(&e))
}
