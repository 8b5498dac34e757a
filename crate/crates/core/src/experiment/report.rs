use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::pipeline::read_eval_report;
use crate::error::{Error, Result};
use crate::evaluation::{write_eval_csv, EvalReport, MetricSet};

/// Aggregated view of every finished cell under a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub rows: Vec<EvalReport>,
    /// Cells listed in the run configuration without an `eval.json`.
    pub missing: Vec<String>,
}

#[derive(Deserialize)]
struct ResolvedHeader {
    config: RunConfig,
}

fn expected_cells(out: &Path) -> Result<Option<Vec<String>>> {
    let path = out.join("config_resolved.json");
    if !path.exists() {
        return Ok(None);
    }
    let header: ResolvedHeader = serde_json::from_str(&fs::read_to_string(&path)?)?;
    Ok(Some(
        header
            .config
            .cells()
            .iter()
            .map(|c| c.rel_dir().to_string_lossy().replace('\\', "/"))
            .collect(),
    ))
}

/// Collects `<out>/<experiment>/<cell>/eval.json` files.
pub fn collect_reports(out: &Path) -> Result<ReportSummary> {
    if !out.is_dir() {
        return Err(Error::config(format!("{} is not a directory", out.display())));
    }
    let mut found = Vec::new();
    let mut rows = Vec::new();
    let mut exp_dirs: Vec<_> = fs::read_dir(out)?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
    exp_dirs.sort();
    for exp in exp_dirs {
        let mut cells: Vec<_> = fs::read_dir(&exp)?.filter_map(|e| e.ok()).map(|e| e.path()).collect();
        cells.sort();
        for cell in cells {
            let path = cell.join("eval.json");
            if !path.is_file() {
                continue;
            }
            rows.push(read_eval_report(&path)?);
            if let (Some(a), Some(b)) = (exp.file_name(), cell.file_name()) {
                found.push(format!("{}/{}", a.to_string_lossy(), b.to_string_lossy()));
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.experiment, &a.variant.features, &a.variant.model).cmp(&(b.experiment, &b.variant.features, &b.variant.model))
    });
    let missing = expected_cells(out)?
        .unwrap_or_default()
        .into_iter()
        .filter(|c| !found.contains(c))
        .collect();
    Ok(ReportSummary { rows, missing })
}

fn display_header() -> Vec<String> {
    let mut h = vec!["experiment".to_string(), "variant".to_string()];
    h.extend(MetricSet::NAMES.iter().map(|s| s.to_string()));
    h
}

/// Writes `summary.csv` (display units), `summary_raw.csv` and
/// `summary.json` into `out`.
pub fn write_report(out: &Path) -> Result<ReportSummary> {
    let summary = collect_reports(out)?;
    if summary.rows.is_empty() {
        log::warn!("no finished cells under {}", out.display());
    }
    for m in &summary.missing {
        log::warn!("cell {m} has no results");
    }
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    w.write_record(display_header())?;
    for r in &summary.rows {
        w.write_record(r.display_record())?;
    }
    w.flush()?;
    write_eval_csv(&out.join("summary_raw.csv"), &summary.rows)?;
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(out.join("summary.json"), text)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_directory_gives_empty_summary() {
        let dir = tempfile::tempdir().unwrap();
        let s = write_report(dir.path()).unwrap();
        assert!(s.rows.is_empty());
        assert!(s.missing.is_empty());
        assert!(dir.path().join("summary.csv").exists());
    }

    #[test]
    fn missing_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(collect_reports(&dir.path().join("nope")).is_err());
    }
}
