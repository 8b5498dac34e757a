//! Forecast accuracy metrics, the historical-mean benchmark, an OLS
//! baseline and aggregation over repeated seeds.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{ExperimentId, FeatureMatrix, SplitDataset};
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::market_data::MonthlySeries;
use crate::nn::{Predictor, Regularizer};

pub const OLS_RIDGE: f64 = 1e-8;
/// Display factor for metric means (shown in units of 10⁻²).
pub const METRIC_DISPLAY_SCALE: f64 = 1e-2;
/// Display factor for standard deviations (shown in units of 10⁻⁵).
pub const SD_DISPLAY_SCALE: f64 = 1e-5;

fn check_lengths(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch(format!("{what}: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::LengthMismatch(format!("{what}: empty input")));
    }
    Ok(())
}

pub fn mse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(predicted.len(), actual.len(), "mse")?;
    Ok(predicted.iter().zip(actual).map(|(p, a)| (a - p) * (a - p)).sum::<f64>() / actual.len() as f64)
}

/// Forecast for month `i` of `actuals` is the mean of `history` followed by
/// `actuals[..i]`.
pub fn historical_mean_forecast(history: &[f64], actuals: &[f64]) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::domain("historical mean needs at least one prior observation"));
    }
    let mut sum: f64 = history.iter().sum();
    let mut n = history.len() as f64;
    let mut out = Vec::with_capacity(actuals.len());
    for a in actuals {
        out.push(sum / n);
        sum += a;
        n += 1.0;
    }
    Ok(out)
}

/// Which constant-expected-return forecast the out-of-sample R² is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    /// Mean of all returns from the start of the return series through `t - 1`.
    #[default]
    Expanding,
    /// Mean of the in-sample (train and validation) targets, held fixed.
    InSampleMean,
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Benchmark::Expanding => "expanding",
            Benchmark::InSampleMean => "in_sample_mean",
        })
    }
}

/// Model, realized and benchmark forecasts by target month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    /// Month in which each forecast return is realized.
    pub dates: Vec<YearMonth>,
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
    pub benchmark: Vec<f64>,
}

impl ForecastSeries {
    pub fn new(dates: Vec<YearMonth>, predicted: Vec<f64>, actual: Vec<f64>, benchmark: Vec<f64>) -> Result<Self> {
        check_lengths(dates.len(), predicted.len(), "forecast dates vs predictions")?;
        check_lengths(actual.len(), predicted.len(), "forecast actuals vs predictions")?;
        check_lengths(benchmark.len(), predicted.len(), "forecast benchmark vs predictions")?;
        Ok(ForecastSeries {
            dates,
            predicted,
            actual,
            benchmark,
        })
    }

    /// Builds the series for a test segment. `returns` is the full return
    /// series; the expanding benchmark uses every return before each target month.
    pub fn for_segment(
        test: &FeatureMatrix,
        predicted: Vec<f64>,
        returns: &MonthlySeries,
        benchmark: Benchmark,
        in_sample_targets: &[f64],
    ) -> Result<Self> {
        let dates: Vec<YearMonth> = (0..test.len()).map(|i| test.target_date(i)).collect();
        let bench = match benchmark {
            Benchmark::Expanding => {
                let first = *dates.first().ok_or_else(|| Error::domain("empty test segment"))?;
                let cut = first.months_since(returns.start);
                if cut <= 0 {
                    return Err(Error::domain(format!("no returns precede {first}")));
                }
                let history = &returns.values[..cut as usize];
                let forecasts = historical_mean_forecast(history, &test.target)?;
                // the test targets must continue the return series without gaps
                for (i, d) in dates.iter().enumerate() {
                    if returns.get(*d) != Some(test.target[i]) {
                        return Err(Error::Alignment(format!("test target at {d} is not the return series value")));
                    }
                }
                forecasts
            }
            Benchmark::InSampleMean => {
                if in_sample_targets.is_empty() {
                    return Err(Error::domain("empty in-sample set"));
                }
                let m = in_sample_targets.iter().sum::<f64>() / in_sample_targets.len() as f64;
                vec![m; dates.len()]
            }
        };
        ForecastSeries::new(dates, predicted, test.target.clone(), bench)
    }
}

/// `1 - SSE(model) / SSE(benchmark)`.
pub fn r2_os(f: &ForecastSeries) -> Result<f64> {
    let num: f64 = f.actual.iter().zip(&f.predicted).map(|(r, p)| (r - p) * (r - p)).sum();
    let den: f64 = f.actual.iter().zip(&f.benchmark).map(|(r, b)| (r - b) * (r - b)).sum();
    if den == 0.0 {
        return Err(Error::DegenerateBenchmark);
    }
    Ok(1.0 - num / den)
}

/// `1 - SSE / SST` with SST about the mean of `actual`.
pub fn r2_is(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(predicted.len(), actual.len(), "r2_is")?;
    let m = actual.iter().sum::<f64>() / actual.len() as f64;
    let sst: f64 = actual.iter().map(|a| (a - m) * (a - m)).sum();
    if sst == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(1.0 - sse / sst)
}

/// In-sample R² of `model` over the training and validation rows.
pub fn r2_is_model(model: &dyn Predictor, split: &SplitDataset) -> Result<f64> {
    let ins = split.in_sample();
    r2_is(&model.predict(&ins.rows), &ins.target)
}

/// Linear forecast `alpha + beta · x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsModel {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub ridge_used: bool,
}

impl OlsModel {
    /// Least squares with an intercept. Rank-deficient designs fall back to a
    /// `1e-8` ridge on the centered regressors when `allow_ridge` is set.
    pub fn fit(rows: &[Vec<f64>], y: &[f64], allow_ridge: bool) -> Result<Self> {
        check_lengths(rows.len(), y.len(), "ols rows vs targets")?;
        let n = rows.len();
        let p = rows[0].len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::LengthMismatch("ols rows differ in width".into()));
        }
        let x_mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j] - x_mean[j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

        let mut ridge_used = false;
        let beta = if p == 0 {
            DVector::zeros(0)
        } else {
            let full_rank = n >= p && {
                let qr = x.clone().qr();
                let r = qr.r();
                let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
                let max = diag.iter().cloned().fold(0.0, f64::max);
                max > 0.0 && diag.iter().all(|d| *d > 1e-10 * max)
            };
            if full_rank {
                let qr = x.clone().qr();
                let qty = qr.q().transpose() * &yc;
                qr.r()
                    .solve_upper_triangular(&qty)
                    .ok_or(Error::RankDeficient)?
            } else if allow_ridge {
                ridge_used = true;
                let xtx = x.transpose() * &x + DMatrix::identity(p, p) * OLS_RIDGE;
                let xty = x.transpose() * &yc;
                xtx.cholesky().ok_or(Error::RankDeficient)?.solve(&xty)
            } else {
                return Err(Error::RankDeficient);
            }
        };
        let beta: Vec<f64> = beta.iter().copied().collect();
        let alpha = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
        Ok(OlsModel { alpha, beta, ridge_used })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.alpha + self.beta.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}

impl Predictor for OlsModel {
    fn input_width(&self) -> usize {
        self.beta.len()
    }

    fn predict_flat(&self, rows: &[f64]) -> Vec<f64> {
        let p = self.beta.len().max(1);
        rows.chunks(p).map(|r| self.predict_row(r)).collect()
    }
}

/// Metrics of one trained model on one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed_index: u64,
    pub mse_train: f64,
    pub mse_val: f64,
    pub mse_test: Option<f64>,
    pub r2_is: f64,
    pub r2_os: Option<f64>,
}

/// Scores `model` on every segment of `split`. The forecast series is
/// returned when the split has a test segment.
pub fn evaluate_model(
    model: &dyn Predictor,
    split: &SplitDataset,
    returns: &MonthlySeries,
    benchmark: Benchmark,
    seed_index: u64,
) -> Result<(SeedMetrics, Option<ForecastSeries>)> {
    let p_train = model.predict(&split.train.rows);
    let p_val = model.predict(&split.validation.rows);
    let ins = split.in_sample();
    let p_ins: Vec<f64> = p_train.iter().chain(&p_val).copied().collect();
    let mut m = SeedMetrics {
        seed_index,
        mse_train: mse(&p_train, &split.train.target)?,
        mse_val: mse(&p_val, &split.validation.target)?,
        mse_test: None,
        r2_is: r2_is(&p_ins, &ins.target)?,
        r2_os: None,
    };
    if split.test.is_empty() {
        return Ok((m, None));
    }
    let p_test = model.predict(&split.test.rows);
    m.mse_test = Some(mse(&p_test, &split.test.target)?);
    let f = ForecastSeries::for_segment(&split.test, p_test, returns, benchmark, &ins.target)?;
    m.r2_os = Some(r2_os(&f)?);
    Ok((m, Some(f)))
}

/// One value per metric; test metrics are absent without a test segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mse_train: f64,
    pub mse_val: f64,
    pub mse_test: Option<f64>,
    pub r2_is: f64,
    pub r2_os: Option<f64>,
}

impl MetricSet {
    pub const NAMES: [&'static str; 5] = ["mse_train", "mse_val", "mse_test", "r2_is", "r2_os"];

    pub fn values(&self) -> [Option<f64>; 5] {
        [Some(self.mse_train), Some(self.mse_val), self.mse_test, Some(self.r2_is), self.r2_os]
    }
}

/// Model family a report describes, e.g. `dropout/technical`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub model: String,
    pub features: String,
}

impl Variant {
    pub fn network(regularizer: Regularizer, features: &str) -> Self {
        Variant {
            model: regularizer.to_string(),
            features: features.to_string(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.model, self.features)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: ExperimentId,
    pub variant: Variant,
    pub per_seed: Vec<SeedMetrics>,
    pub mean: MetricSet,
    /// Sample standard deviation across seeds; zero for a single seed.
    pub sd: MetricSet,
    pub single_seed: bool,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn optional_mean_sd(xs: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let present: Vec<f64> = xs.iter().flatten().copied().collect();
    if present.is_empty() || present.len() != xs.len() {
        return (None, None);
    }
    let (m, s) = mean_sd(&present);
    (Some(m), Some(s))
}

pub fn aggregate(experiment: ExperimentId, variant: Variant, per_seed: Vec<SeedMetrics>) -> Result<EvalReport> {
    if per_seed.is_empty() {
        return Err(Error::domain("aggregate needs at least one seed"));
    }
    let col = |f: fn(&SeedMetrics) -> f64| mean_sd(&per_seed.iter().map(f).collect::<Vec<_>>());
    let ocol = |f: fn(&SeedMetrics) -> Option<f64>| optional_mean_sd(&per_seed.iter().map(f).collect::<Vec<_>>());
    let (tr, tr_sd) = col(|m| m.mse_train);
    let (va, va_sd) = col(|m| m.mse_val);
    let (te, te_sd) = ocol(|m| m.mse_test);
    let (ri, ri_sd) = col(|m| m.r2_is);
    let (ro, ro_sd) = ocol(|m| m.r2_os);
    Ok(EvalReport {
        experiment,
        variant,
        single_seed: per_seed.len() == 1,
        per_seed,
        mean: MetricSet {
            mse_train: tr,
            mse_val: va,
            mse_test: te,
            r2_is: ri,
            r2_os: ro,
        },
        sd: MetricSet {
            mse_train: tr_sd,
            mse_val: va_sd,
            mse_test: te_sd,
            r2_is: ri_sd,
            r2_os: ro_sd,
        },
    })
}

/// `mean (±sd)` in display units: means ×10², standard deviations ×10⁵.
pub fn format_cell(mean: Option<f64>, sd: Option<f64>) -> String {
    match (mean, sd) {
        (Some(m), Some(s)) => format!("{:.3} (±{:.3})", m / METRIC_DISPLAY_SCALE, s / SD_DISPLAY_SCALE),
        (Some(m), None) => format!("{:.3}", m / METRIC_DISPLAY_SCALE),
        _ => "-".to_string(),
    }
}

impl EvalReport {
    pub const CSV_HEADER: [&'static str; 14] = [
        "experiment",
        "model",
        "features",
        "n_seeds",
        "mse_train",
        "mse_train_sd",
        "mse_val",
        "mse_val_sd",
        "mse_test",
        "mse_test_sd",
        "r2_is",
        "r2_is_sd",
        "r2_os",
        "r2_os_sd",
    ];

    /// Raw (unscaled) values in [`EvalReport::CSV_HEADER`] order.
    pub fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut rec = vec![
            self.experiment.to_string(),
            self.variant.model.clone(),
            self.variant.features.clone(),
            self.per_seed.len().to_string(),
        ];
        for (m, s) in self.mean.values().into_iter().zip(self.sd.values()) {
            rec.push(opt(m));
            rec.push(opt(s));
        }
        rec
    }

    /// Display-formatted cells for a summary table row.
    pub fn display_record(&self) -> Vec<String> {
        let mut rec = vec![self.experiment.to_string(), self.variant.to_string()];
        for (m, s) in self.mean.values().into_iter().zip(self.sd.values()) {
            rec.push(format_cell(m, if self.single_seed { None } else { s }));
        }
        rec
    }
}

pub fn write_eval_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EvalReport::CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_forecasts_csv(path: &Path, series: &[(u64, ForecastSeries)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed_index", "date", "predicted", "actual", "benchmark"])?;
    for (seed, f) in series {
        for i in 0..f.dates.len() {
            w.write_record([
                seed.to_string(),
                f.dates[i].to_string(),
                f.predicted[i].to_string(),
                f.actual[i].to_string(),
                f.benchmark[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_cases() {
        assert_eq!(mse(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(mse(&[0.3, 0.1], &[0.3, 0.1]).unwrap(), 0.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn expanding_mean() {
        assert_eq!(historical_mean_forecast(&[1.0, 3.0], &[5.0, 7.0]).unwrap(), vec![2.0, 3.0]);
        assert!(historical_mean_forecast(&[], &[1.0]).is_err());
    }

    #[test]
    fn r2_hand_case() {
        let d = (0..3).map(|i| YearMonth::new(2000, 1 + i).unwrap()).collect();
        let f = ForecastSeries::new(d, vec![1.5, 2.0, 2.5], vec![1.0, 2.0, 3.0], vec![2.0; 3]).unwrap();
        assert!((r2_os(&f).unwrap() - 0.75).abs() < 1e-15);
        let flat = ForecastSeries {
            actual: vec![2.0; 3],
            ..f
        };
        assert!(matches!(r2_os(&flat), Err(Error::DegenerateBenchmark)));
    }

    #[test]
    fn r2_is_cases() {
        let y = [1.0, 2.0, 4.0];
        assert_eq!(r2_is(&y, &y).unwrap(), 1.0);
        assert!(r2_is(&[7.0 / 3.0; 3], &y).unwrap().abs() < 1e-15);
        assert!(matches!(r2_is(&[1.0, 1.0], &[3.0, 3.0]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn ols_zero_regressor() {
        let rows = vec![vec![0.0]; 4];
        let m = OlsModel::fit(&rows, &[1.0, 2.0, 3.0, 6.0], true).unwrap();
        assert_eq!(m.alpha, 3.0);
        assert_eq!(m.beta, vec![0.0]);
        assert!(m.ridge_used);
        assert!(matches!(OlsModel::fit(&rows, &[1.0, 2.0, 3.0, 6.0], false), Err(Error::RankDeficient)));
    }

    #[test]
    fn aggregate_two_points() {
        let s = |i, r| SeedMetrics {
            seed_index: i,
            mse_train: 1.0,
            mse_val: 1.0,
            mse_test: None,
            r2_is: r,
            r2_os: None,
        };
        let v = Variant::network(Regularizer::Dropout, "technical");
        let rep = aggregate(ExperimentId::Exp1, v.clone(), vec![s(0, 0.1), s(1, 0.3)]).unwrap();
        assert!((rep.mean.r2_is - 0.2).abs() < 1e-15);
        assert!((rep.sd.r2_is - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(rep.mean.mse_test, None);
        let one = aggregate(ExperimentId::Exp1, v, vec![s(0, 0.1)]).unwrap();
        assert!(one.single_seed);
        assert_eq!(one.sd.r2_is, 0.0);
    }

    #[test]
    fn display_scaling_leaves_values_alone() {
        assert_eq!(format_cell(Some(0.00569), Some(0.00000621)), "0.569 (±0.621)");
        assert_eq!(format_cell(None, None), "-");
    }
}
