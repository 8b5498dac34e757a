use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").canonicalize().unwrap()
}

fn stockhpo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stockhpo"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

/// Writes a config with absolute data paths and a short training schedule.
fn write_config(dir: &Path, body: &str) -> PathBuf {
    let d = data_dir();
    let text = format!(
        "epochs = 4\njobs = 1\nout = \"out\"\n{body}\n[data]\nprices = \"{}\"\nfundamentals = \"{}\"\n",
        d.join("sp500_monthly.csv").display(),
        d.join("gw_monthly.csv").display()
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn single_cell_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "experiments = [\"Exp4\"]\nfeature_sets = [\"technical\"]\nregularizers = [\"dropout\"]\n\
         [shap]\nenabled = true\nbackground_size = 10\nn_coalitions = 64\nmax_instances = 4\n",
    );
    let c = cfg.to_str().unwrap();
    ok(&stockhpo(&["run", "--config", c, "--budget", "5", "--seeds", "2"]));
    let out = tmp.path().join("out");
    let cell = out.join("Exp4").join("technical_dropout");
    for f in [
        "study.jsonl",
        "eval.csv",
        "eval.json",
        "forecasts.csv",
        "trajectory.csv",
        "model_seed0.json",
        "model_seed1.json",
        "shap_importance.csv",
        "shap_rank.csv",
    ] {
        assert!(cell.join(f).is_file(), "missing {f}");
    }
    for f in ["config_resolved.json", "status.json", "metadata.json", "summary.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let log = fs::read_to_string(cell.join("study.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 10);
    let rank = fs::read_to_string(cell.join("shap_rank.csv")).unwrap();
    assert_eq!(rank.lines().count(), 18);
    let eval = json(&cell.join("eval.json"));
    assert_eq!(eval["report"]["per_seed"].as_array().unwrap().len(), 2);

    let before = fs::read(cell.join("shap_importance.csv")).unwrap();
    ok(&stockhpo(&["shap", "--config", c]));
    assert_eq!(fs::read(cell.join("shap_importance.csv")).unwrap(), before);
}

#[test]
fn default_matrix_has_sixteen_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let c = cfg.to_str().unwrap();
    ok(&stockhpo(&["run", "--config", c, "--budget", "1", "--seeds", "1"]));
    let out = tmp.path().join("out");
    let status = json(&out.join("status.json"));
    assert_eq!(status["cells"].as_array().unwrap().len(), 16);
    let report = stockhpo(&["report", out.to_str().unwrap()]);
    ok(&report);
    assert!(String::from_utf8_lossy(&report.stdout).contains("16 rows, 0 missing"));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 17);
}

#[test]
fn interrupted_study_resumes_where_it_stopped() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "experiments = [\"Exp3\"]\nfeature_sets = [\"fundamental\"]\nregularizers = [\"batch_norm\"]\n",
    );
    let c = cfg.to_str().unwrap();
    let args = ["run", "--config", c, "--budget", "6", "--seeds", "1", "--sampler", "sa"];
    ok(&stockhpo(&args));
    let out = tmp.path().join("out");
    let log_path = out.join("Exp3").join("fundamental_batch_norm").join("study.jsonl");
    let full = fs::read_to_string(&log_path).unwrap();
    let meta = json(&out.join("metadata.json"));
    assert_eq!(meta["cells"][0]["trained"], 6);

    let head: String = full.lines().take(2).map(|l| format!("{l}\n")).collect();
    fs::write(&log_path, head).unwrap();
    ok(&stockhpo(&args));
    let meta = json(&out.join("metadata.json"));
    assert_eq!(meta["cells"][0]["trained"], 4);
    assert_eq!(fs::read_to_string(&log_path).unwrap(), full);

    ok(&stockhpo(&args));
    assert_eq!(json(&out.join("metadata.json"))["cells"][0]["trained"], 0);
}

#[test]
fn features_are_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let c = cfg.to_str().unwrap();
    ok(&stockhpo(&["features", "--config", c]));
    let dir = tmp.path().join("out").join("features");
    let a = (fs::read(dir.join("technical.csv")).unwrap(), fs::read(dir.join("fundamental.csv")).unwrap());
    ok(&stockhpo(&["features", "--config", c]));
    let b = (fs::read(dir.join("technical.csv")).unwrap(), fs::read(dir.join("fundamental.csv")).unwrap());
    assert_eq!(a, b);
    let header = String::from_utf8_lossy(&a.1).lines().next().unwrap().to_string();
    assert!(header.contains("DP") && header.contains("INFL"));
}

#[test]
fn report_on_empty_directory_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stockhpo(&["report", tmp.path().to_str().unwrap()]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 rows"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "no_such_key = 1");
    let out = stockhpo(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = write_config(tmp.path(), "");
    let out = stockhpo(&["run", "--config", cfg.to_str().unwrap(), "--budget", "0"]);
    assert_eq!(out.status.code(), Some(2));

    let out = stockhpo(&["run", "--config", tmp.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_file_fails_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "epochs = 2\nexperiments = [\"Exp4\"]\nfeature_sets = [\"technical\"]\nregularizers = [\"dropout\"]\n\
                [data]\nprices = \"nowhere.csv\"\n";
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, text).unwrap();
    let out = stockhpo(&["run", "--config", cfg.to_str().unwrap(), "--budget", "1", "--seeds", "1"]);
    assert_eq!(out.status.code(), Some(1));
}
