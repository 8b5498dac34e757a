//! Experiment matrix: configuration, the end-to-end pipeline and reports.

mod config;
mod pipeline;
mod report;

pub use config::{Cell, DataConfig, FeatureSet, Overrides, RunConfig, ShapConfig};
pub use pipeline::{cmd_features, cmd_run, cmd_shap, rebuild_network, CellOutcome, LoadedData, RunSummary};
pub use report::{collect_reports, write_report, ReportSummary};
