//! Binary technical trading signals: time-series momentum, moving-average
//! crossover and on-balance-volume crossover rules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureTable;
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::market_data::MonthlySeries;

/// Relative slack under which two moving averages count as equal.
///
/// Means of identical values are not always bit-identical after summation,
/// and a tie must resolve to a buy signal.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub const MOMENTUM_LOOKBACKS: [usize; 5] = [1, 3, 6, 9, 12];
pub const SHORT_WINDOWS: [usize; 3] = [1, 2, 3];
pub const LONG_WINDOWS: [usize; 2] = [9, 12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum IndicatorSpec {
    Mom { m: usize },
    Ma { s: usize, l: usize },
    Vol { s: usize, l: usize },
}

impl IndicatorSpec {
    /// Canonical column label, e.g. `MOM12M`, `MA19`, `VOL312`.
    pub fn label(&self) -> String {
        match *self {
            IndicatorSpec::Mom { m } => format!("MOM{m}M"),
            IndicatorSpec::Ma { s, l } => format!("MA{s}{l}"),
            IndicatorSpec::Vol { s, l } => format!("VOL{s}{l}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            IndicatorSpec::Mom { m } if m == 0 => Err(Error::IndicatorSpec("momentum look-back must be >= 1".into())),
            IndicatorSpec::Ma { s, l } | IndicatorSpec::Vol { s, l } if s == 0 || s >= l => Err(
                Error::IndicatorSpec(format!("need 1 <= short window < long window, got s={s}, l={l}")),
            ),
            _ => Ok(()),
        }
    }

    /// Months of history consumed before the first signal.
    pub fn lookback(&self) -> usize {
        match *self {
            IndicatorSpec::Mom { m } => m,
            IndicatorSpec::Ma { l, .. } => l - 1,
            IndicatorSpec::Vol { l, .. } => l,
        }
    }

    /// The 17 indicators in canonical column order.
    pub fn full_set() -> Vec<IndicatorSpec> {
        let mut out: Vec<_> = MOMENTUM_LOOKBACKS.iter().map(|&m| IndicatorSpec::Mom { m }).collect();
        for &s in &SHORT_WINDOWS {
            for &l in &LONG_WINDOWS {
                out.push(IndicatorSpec::Ma { s, l });
            }
        }
        for &s in &SHORT_WINDOWS {
            for &l in &LONG_WINDOWS {
                out.push(IndicatorSpec::Vol { s, l });
            }
        }
        out
    }
}

impl fmt::Display for IndicatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A run of buy (+1) / sell (−1) signals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalSeries {
    pub start: YearMonth,
    pub values: Vec<i8>,
}

impl SignalSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.values.len() as i32 - 1)
    }

    pub fn get(&self, date: YearMonth) -> Option<i8> {
        let i = date.months_since(self.start);
        (i >= 0).then(|| self.values.get(i as usize).copied()).flatten()
    }
}

fn signal(buy: bool) -> i8 {
    if buy {
        1
    } else {
        -1
    }
}

fn at_least(a: f64, b: f64) -> bool {
    a >= b - TIE_TOLERANCE * a.abs().max(b.abs())
}

/// `+1` when `P[t] >= P[t-m]`, else `-1`.
pub fn momentum(prices: &MonthlySeries, m: usize) -> Result<SignalSeries> {
    IndicatorSpec::Mom { m }.validate()?;
    if prices.len() <= m {
        return Err(Error::domain(format!(
            "momentum({m}) needs more than {m} prices, got {}",
            prices.len()
        )));
    }
    let p = &prices.values;
    let values = (m..p.len()).map(|t| signal(p[t] >= p[t - m])).collect();
    Ok(SignalSeries {
        start: prices.start.add_months(m as i32),
        values,
    })
}

/// Trailing simple moving average over `j` months, dated at the window end.
pub fn sma(series: &MonthlySeries, j: usize) -> Result<MonthlySeries> {
    if j == 0 {
        return Err(Error::domain("moving-average window must be >= 1"));
    }
    if series.len() < j {
        return Err(Error::domain(format!(
            "moving-average window {j} exceeds series length {}",
            series.len()
        )));
    }
    let values = series
        .values
        .windows(j)
        .map(|w| w.iter().sum::<f64>() / j as f64)
        .collect();
    MonthlySeries::new(format!("{}_sma{j}", series.name), series.start.add_months(j as i32 - 1), values)
}

/// Compares window means through the cross-multiplied sums `l * sum_s >= s * sum_l`,
/// which is exact for integer-valued inputs such as share volumes.
fn crossover(series: &MonthlySeries, s: usize, l: usize) -> Result<SignalSeries> {
    if series.len() < l {
        return Err(Error::domain(format!("window {l} exceeds series length {}", series.len())));
    }
    let x = &series.values;
    let values = (l - 1..x.len())
        .map(|t| {
            let short: f64 = x[t + 1 - s..=t].iter().sum();
            let long: f64 = x[t + 1 - l..=t].iter().sum();
            signal(at_least(short * l as f64, long * s as f64))
        })
        .collect();
    Ok(SignalSeries {
        start: series.start.add_months(l as i32 - 1),
        values,
    })
}

/// `+1` when the `s`-month average price is at or above the `l`-month average.
pub fn ma_signal(prices: &MonthlySeries, s: usize, l: usize) -> Result<SignalSeries> {
    IndicatorSpec::Ma { s, l }.validate()?;
    if prices.len() < l {
        return Err(Error::domain(format!("MA({s},{l}) needs {l} prices, got {}", prices.len())));
    }
    crossover(prices, s, l)
}

fn check_aligned(prices: &MonthlySeries, volumes: &MonthlySeries) -> Result<()> {
    if prices.start != volumes.start || prices.len() != volumes.len() {
        return Err(Error::Alignment(format!(
            "prices {}..{} vs volumes {}..{}",
            prices.start,
            prices.end(),
            volumes.start,
            volumes.end()
        )));
    }
    Ok(())
}

/// On-balance volume: running sum of volume signed by the month's price direction.
///
/// The first month only anchors the direction, so the output starts one month later.
pub fn obv(prices: &MonthlySeries, volumes: &MonthlySeries) -> Result<MonthlySeries> {
    check_aligned(prices, volumes)?;
    if prices.len() < 2 {
        return Err(Error::domain("OBV needs at least two months"));
    }
    let p = &prices.values;
    let mut acc = 0.0;
    let values = (1..p.len())
        .map(|k| {
            let d = if p[k] >= p[k - 1] { 1.0 } else { -1.0 };
            acc += volumes.values[k] * d;
            acc
        })
        .collect();
    MonthlySeries::new("obv", prices.start.succ(), values)
}

/// Moving-average crossover applied to on-balance volume.
pub fn vol_signal(prices: &MonthlySeries, volumes: &MonthlySeries, s: usize, l: usize) -> Result<SignalSeries> {
    IndicatorSpec::Vol { s, l }.validate()?;
    check_aligned(prices, volumes)?;
    if prices.len() < l + 1 {
        return Err(Error::domain(format!(
            "VOL({s},{l}) needs {} months, got {}",
            l + 1,
            prices.len()
        )));
    }
    crossover(&obv(prices, volumes)?, s, l)
}

pub fn compute(spec: IndicatorSpec, prices: &MonthlySeries, volumes: &MonthlySeries) -> Result<SignalSeries> {
    match spec {
        IndicatorSpec::Mom { m } => momentum(prices, m),
        IndicatorSpec::Ma { s, l } => ma_signal(prices, s, l),
        IndicatorSpec::Vol { s, l } => vol_signal(prices, volumes, s, l),
    }
}

/// All 17 signals as a feature table, rows starting at the latest common start.
pub fn full_technical_set(prices: &MonthlySeries, volumes: &MonthlySeries) -> Result<FeatureTable> {
    check_aligned(prices, volumes)?;
    let specs = IndicatorSpec::full_set();
    let signals = specs
        .iter()
        .map(|&s| compute(s, prices, volumes))
        .collect::<Result<Vec<_>>>()?;
    let start = signals.iter().map(|s| s.start).max().expect("non-empty indicator set");
    let end = prices.end();
    let n = end.months_since(start) + 1;
    let dates: Vec<YearMonth> = (0..n).map(|i| start.add_months(i)).collect();
    let rows = dates
        .iter()
        .map(|&d| {
            signals
                .iter()
                .map(|s| f64::from(s.get(d).expect("signals share the price end date")))
                .collect()
        })
        .collect();
    FeatureTable::new(dates, specs.iter().map(IndicatorSpec::label).collect(), rows)
}
