//! Supervised examples, experiment windows, chronological splits and feature scaling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::market_data::MonthlySeries;

/// Dated predictor rows without a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub dates: Vec<YearMonth>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(dates: Vec<YearMonth>, columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if dates.len() != rows.len() {
            return Err(Error::LengthMismatch(format!("{} dates vs {} rows", dates.len(), rows.len())));
        }
        for (d, r) in dates.iter().zip(&rows) {
            if r.len() != columns.len() {
                return Err(Error::LengthMismatch(format!("row {d} has {} values, expected {}", r.len(), columns.len())));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::DataDate {
                    context: "feature table".into(),
                    date: *d,
                    message: "non-finite feature value".into(),
                });
            }
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("feature dates must be strictly increasing"));
        }
        Ok(FeatureTable { dates, columns, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Writes `date,<columns...>` with dates as `YYYY-MM`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (d, r) in self.dates.iter().zip(&self.rows) {
            let mut rec = vec![d.to_string()];
            rec.extend(r.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Predictor rows paired with the following month's return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    /// Feature dates `t`; the target of each row is realized in month `t + 1`.
    pub dates: Vec<YearMonth>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn target_date(&self, i: usize) -> YearMonth {
        self.dates[i].succ()
    }

    /// Rows whose index satisfies `keep`, preserving order.
    fn select(&self, mut keep: impl FnMut(usize) -> bool) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        FeatureMatrix {
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            columns: self.columns.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            target: idx.iter().map(|&i| self.target[i]).collect(),
        }
    }

    /// Concatenation of `self` followed by `other` (same columns, later dates).
    pub fn concat(&self, other: &FeatureMatrix) -> FeatureMatrix {
        let mut out = self.clone();
        out.dates.extend(&other.dates);
        out.rows.extend(other.rows.iter().cloned());
        out.target.extend(&other.target);
        out
    }
}

/// Pairs each feature row dated `t` with the return realized in `t + 1`.
///
/// Rows without a following return are dropped.
pub fn make_supervised(features: &FeatureTable, returns: &MonthlySeries) -> Result<FeatureMatrix> {
    let mut out = FeatureMatrix {
        dates: Vec::new(),
        columns: features.columns.clone(),
        rows: Vec::new(),
        target: Vec::new(),
    };
    for (d, r) in features.dates.iter().zip(&features.rows) {
        if let Some(y) = returns.get(d.succ()) {
            out.dates.push(*d);
            out.rows.push(r.clone());
            out.target.push(y);
        }
    }
    if out.is_empty() {
        return Err(Error::Alignment(format!(
            "features {}..{} have no following returns in {}..{}",
            features.dates.first().map(|d| d.to_string()).unwrap_or_default(),
            features.dates.last().map(|d| d.to_string()).unwrap_or_default(),
            returns.start,
            returns.end()
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [ExperimentId::Exp1, ExperimentId::Exp2, ExperimentId::Exp3, ExperimentId::Exp4];

    /// Last calendar year of the experiment window; all windows open in 1950.
    pub fn end_year(self) -> i32 {
        match self {
            ExperimentId::Exp1 => 2017,
            ExperimentId::Exp2 => 2015,
            ExperimentId::Exp3 => 2007,
            ExperimentId::Exp4 => 2002,
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            ExperimentId::Exp1 => 1,
            ExperimentId::Exp2 => 2,
            ExperimentId::Exp3 => 3,
            ExperimentId::Exp4 => 4,
        };
        write!(f, "Exp{n}")
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exp1" | "1" => Ok(ExperimentId::Exp1),
            "exp2" | "2" => Ok(ExperimentId::Exp2),
            "exp3" | "3" => Ok(ExperimentId::Exp3),
            "exp4" | "4" => Ok(ExperimentId::Exp4),
            _ => Err(Error::config(format!("unknown experiment `{s}`"))),
        }
    }
}

/// Share of each window's months reserved as out-of-sample when no
/// explicit `oos_start` is configured.
pub const DEFAULT_OOS_FRACTION: f64 = 0.2;

/// An experiment period. Out-of-sample covers returns realized in
/// `[oos_start, full_end]`; in-sample covers returns realized before `oos_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentWindow {
    pub id: ExperimentId,
    pub full_start: YearMonth,
    pub full_end: YearMonth,
    pub oos_start: YearMonth,
}

impl ExperimentWindow {
    pub fn new(id: ExperimentId, full_start: YearMonth, full_end: YearMonth, oos_start: YearMonth) -> Result<Self> {
        if !(full_start < oos_start && oos_start <= full_end) {
            return Err(Error::config(format!(
                "{id}: need full_start < oos_start <= full_end, got {full_start}, {oos_start}, {full_end}"
            )));
        }
        Ok(ExperimentWindow {
            id,
            full_start,
            full_end,
            oos_start,
        })
    }

    /// January 1950 through December of the experiment's end year, with the
    /// final `DEFAULT_OOS_FRACTION` of months (rounded down) out-of-sample.
    pub fn standard(id: ExperimentId) -> Self {
        let full_start = YearMonth::new(1950, 1).expect("valid");
        let full_end = YearMonth::new(id.end_year(), 12).expect("valid");
        let months = full_end.months_since(full_start) + 1;
        let n_oos = (months as f64 * DEFAULT_OOS_FRACTION).floor() as i32;
        ExperimentWindow {
            id,
            full_start,
            full_end,
            oos_start: full_end.add_months(1 - n_oos),
        }
    }

    pub fn with_oos_start(self, oos_start: YearMonth) -> Result<Self> {
        ExperimentWindow::new(self.id, self.full_start, self.full_end, oos_start)
    }
}

/// Per-feature affine transform fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Population standard deviation; `1.0` for constant columns.
    pub scale: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Scaler {
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}

pub fn fit_scaler(train: &[Vec<f64>]) -> Result<Scaler> {
    let first = train.first().ok_or_else(|| Error::domain("cannot fit a scaler on zero rows"))?;
    let n = train.len() as f64;
    let p = first.len();
    let mut mean = vec![0.0; p];
    for r in train {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for r in train {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let mut scale = Vec::with_capacity(p);
    let mut constant = Vec::with_capacity(p);
    for (v, m) in var.into_iter().zip(&mean) {
        let sd = (v / n).sqrt();
        let is_const = sd <= 1e-12 * m.abs().max(1.0);
        constant.push(is_const);
        scale.push(if is_const { 1.0 } else { sd });
    }
    Ok(Scaler { mean, scale, constant })
}

/// Chronological train / validation / test partition, features already scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub window: ExperimentWindow,
    pub train: FeatureMatrix,
    pub validation: FeatureMatrix,
    pub test: FeatureMatrix,
    pub scaler: Scaler,
}

/// Boundary dates of a split, echoed into reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBoundaries {
    pub experiment: ExperimentId,
    pub train_first: YearMonth,
    pub train_last: YearMonth,
    pub validation_first: YearMonth,
    pub validation_last: YearMonth,
    pub test_first: Option<YearMonth>,
    pub test_last: Option<YearMonth>,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
}

impl SplitDataset {
    pub fn input_width(&self) -> usize {
        self.train.width()
    }

    /// Training followed by validation rows.
    pub fn in_sample(&self) -> FeatureMatrix {
        self.train.concat(&self.validation)
    }

    pub fn boundaries(&self) -> SplitBoundaries {
        SplitBoundaries {
            experiment: self.window.id,
            train_first: self.train.dates[0],
            train_last: *self.train.dates.last().unwrap(),
            validation_first: self.validation.dates[0],
            validation_last: *self.validation.dates.last().unwrap(),
            test_first: self.test.dates.first().copied(),
            test_last: self.test.dates.last().copied(),
            n_train: self.train.len(),
            n_validation: self.validation.len(),
            n_test: self.test.len(),
        }
    }

    /// The same split with the test segment removed.
    pub fn without_test(&self) -> SplitDataset {
        let mut out = self.clone();
        out.test = self.test.select(|_| false);
        out
    }
}

/// Cuts `data` into the window's in-sample and out-of-sample rows, halves the
/// in-sample chronologically (odd counts give the extra row to training) and
/// z-scores every segment with statistics from the training half only.
pub fn split(data: &FeatureMatrix, window: &ExperimentWindow) -> Result<SplitDataset> {
    let in_window = |i: usize| {
        let d = data.dates[i];
        d >= window.full_start && data.target_date(i) <= window.full_end
    };
    let last_target = (0..data.len()).rev().find(|&i| in_window(i)).map(|i| data.target_date(i));
    if last_target != Some(window.full_end) {
        return Err(Error::domain(format!(
            "{}: data does not reach the window end {} (last usable target {})",
            window.id,
            window.full_end,
            last_target.map(|d| d.to_string()).unwrap_or_else(|| "none".into())
        )));
    }
    let in_sample = data.select(|i| in_window(i) && data.target_date(i) < window.oos_start);
    let test = data.select(|i| in_window(i) && data.target_date(i) >= window.oos_start);
    if in_sample.len() < 4 {
        return Err(Error::domain(format!(
            "{}: only {} in-sample rows before {}",
            window.id,
            in_sample.len(),
            window.oos_start
        )));
    }
    let n_train = in_sample.len().div_ceil(2);
    let mut train = in_sample.select(|i| i < n_train);
    let mut validation = in_sample.select(|i| i >= n_train);
    let mut test = test;

    let scaler = fit_scaler(&train.rows)?;
    train.rows = scaler.apply(&train.rows);
    validation.rows = scaler.apply(&validation.rows);
    test.rows = scaler.apply(&test.rows);
    Ok(SplitDataset {
        window: *window,
        train,
        validation,
        test,
        scaler,
    })
}
