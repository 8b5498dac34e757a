//! Monthly OHLCV and Goyal–Welch fundamentals ingestion.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::date::YearMonth;
use crate::error::{Error, Result};

/// A contiguous run of monthly observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    pub name: String,
    pub start: YearMonth,
    pub values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(name: impl Into<String>, start: YearMonth, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("monthly series must hold at least one value"));
        }
        Ok(MonthlySeries {
            name: name.into(),
            start,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Date of the last value.
    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.values.len() as i32 - 1)
    }

    pub fn date_at(&self, i: usize) -> YearMonth {
        self.start.add_months(i as i32)
    }

    pub fn get(&self, date: YearMonth) -> Option<f64> {
        let i = date.months_since(self.start);
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied()
    }

    pub fn dates(&self) -> impl Iterator<Item = YearMonth> + '_ {
        (0..self.values.len()).map(move |i| self.date_at(i))
    }

    /// Restricts the series to `[from, to]`, returning `None` when nothing overlaps.
    pub fn slice(&self, from: YearMonth, to: YearMonth) -> Option<MonthlySeries> {
        let from = from.max(self.start);
        let to = to.min(self.end());
        if from > to {
            return None;
        }
        let a = from.months_since(self.start) as usize;
        let b = to.months_since(self.start) as usize;
        Some(MonthlySeries {
            name: self.name.clone(),
            start: from,
            values: self.values[a..=b].to_vec(),
        })
    }
}

/// One month of index prices and traded volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    pub date: YearMonth,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

/// One month of the Goyal–Welch predictor file, as published.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFundamentalsRow {
    pub date: YearMonth,
    pub index_level: f64,
    pub dividends_12m: f64,
    pub earnings_12m: f64,
    pub book_to_market: f64,
    pub ntis: f64,
    pub tbl: f64,
    pub lty: f64,
    pub ltr: f64,
    pub corp_bond_return: f64,
    pub baa_yield: f64,
    pub aaa_yield: f64,
    pub cpi: f64,
    pub svar: f64,
}

pub const OHLCV_COLUMNS: [&str; 7] = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"];

/// Maps `RawFundamentalsRow` fields to CSV header names.
///
/// Defaults follow the column names of the public Goyal–Welch monthly sheet,
/// except `cpi`, which that sheet does not carry as a level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GwColumnMap {
    pub date: String,
    pub index_level: String,
    pub dividends_12m: String,
    pub earnings_12m: String,
    pub book_to_market: String,
    pub ntis: String,
    pub tbl: String,
    pub lty: String,
    pub ltr: String,
    pub corp_bond_return: String,
    pub baa_yield: String,
    pub aaa_yield: String,
    pub cpi: String,
    pub svar: String,
}

impl Default for GwColumnMap {
    fn default() -> Self {
        GwColumnMap {
            date: "yyyymm".into(),
            index_level: "Index".into(),
            dividends_12m: "D12".into(),
            earnings_12m: "E12".into(),
            book_to_market: "b/m".into(),
            ntis: "ntis".into(),
            tbl: "tbl".into(),
            lty: "lty".into(),
            ltr: "ltr".into(),
            corp_bond_return: "corp".into(),
            baa_yield: "BAA".into(),
            aaa_yield: "AAA".into(),
            cpi: "CPI".into(),
            svar: "svar".into(),
        }
    }
}

impl GwColumnMap {
    fn value_columns(&self) -> [&str; 13] {
        [
            &self.index_level,
            &self.dividends_12m,
            &self.earnings_12m,
            &self.book_to_market,
            &self.ntis,
            &self.tbl,
            &self.lty,
            &self.ltr,
            &self.corp_bond_return,
            &self.baa_yield,
            &self.aaa_yield,
            &self.cpi,
            &self.svar,
        ]
    }
}

/// Optional inclusive month span for trimming a parsed file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub from: Option<YearMonth>,
    pub to: Option<YearMonth>,
}

impl Span {
    fn contains(&self, d: YearMonth) -> bool {
        self.from.is_none_or(|f| d >= f) && self.to.is_none_or(|t| d <= t)
    }
}

/// Parses a number, tolerating thousands separators and surrounding blanks.
/// Empty cells and `NA`/`null` markers come back as `None`.
fn parse_cell(raw: &str) -> std::result::Result<Option<f64>, ()> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("null") || s == "." {
        return Ok(None);
    }
    let cleaned: String = s.chars().filter(|&c| c != ',').collect();
    cleaned.parse::<f64>().map(Some).map_err(|_| ())
}

fn header_index(headers: &csv::StringRecord, want: &str, file: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(want))
        .ok_or_else(|| Error::Schema {
            file: file.to_path_buf(),
            column: want.to_string(),
        })
}

/// Raw rows after column lookup: a date plus optional numeric cells.
struct RawTable {
    context: String,
    dates: Vec<YearMonth>,
    cells: Vec<Vec<Option<f64>>>,
}

fn read_table<R: Read>(
    reader: R,
    file: &Path,
    date_col: &str,
    value_cols: &[&str],
    span: Span,
) -> Result<RawTable> {
    let context = file.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().flexible(false).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let di = header_index(&headers, date_col, file)?;
    let idx = value_cols
        .iter()
        .map(|c| header_index(&headers, c, file))
        .collect::<Result<Vec<_>>>()?;

    let mut dates = Vec::new();
    let mut cells = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date: YearMonth = rec[di].parse().map_err(|_| Error::DataRow {
            context: context.clone(),
            row,
            message: format!("unparsable date `{}`", &rec[di]),
        })?;
        if !span.contains(date) {
            continue;
        }
        let mut vals = Vec::with_capacity(idx.len());
        for (&i, name) in idx.iter().zip(value_cols) {
            let v = parse_cell(&rec[i]).map_err(|_| Error::DataRow {
                context: context.clone(),
                row,
                message: format!("unparsable number `{}` in column `{name}`", &rec[i]),
            })?;
            vals.push(v);
        }
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(Error::DataDate {
                    context,
                    date,
                    message: "duplicated or out-of-order month".into(),
                });
            }
            if date != YearMonth::succ(prev) {
                return Err(Error::DataDate {
                    context,
                    date: prev.succ(),
                    message: "missing month".into(),
                });
            }
        }
        dates.push(date);
        cells.push(vals);
    }
    Ok(RawTable { context, dates, cells })
}

/// Drops incomplete rows at either end; an incomplete interior row is an error.
fn trim_incomplete(table: RawTable) -> Result<(String, Vec<YearMonth>, Vec<Vec<f64>>)> {
    let complete = |r: &Vec<Option<f64>>| r.iter().all(Option::is_some);
    let first = table.cells.iter().position(complete);
    let last = table.cells.iter().rposition(complete);
    let (first, last) = match (first, last) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::DataRow {
                context: table.context,
                row: 0,
                message: "no complete rows".into(),
            })
        }
    };
    let mut dates = Vec::with_capacity(last - first + 1);
    let mut rows = Vec::with_capacity(last - first + 1);
    for i in first..=last {
        if !complete(&table.cells[i]) {
            return Err(Error::DataDate {
                context: table.context,
                date: table.dates[i],
                message: "missing value inside the sample".into(),
            });
        }
        dates.push(table.dates[i]);
        rows.push(table.cells[i].iter().map(|v| v.unwrap()).collect());
    }
    Ok((table.context, dates, rows))
}

pub fn parse_ohlcv_csv(path: &Path) -> Result<Vec<PriceBar>> {
    let file = std::fs::File::open(path)?;
    parse_ohlcv_reader(file, path)
}

/// Parses OHLCV rows from any reader; `origin` only labels errors.
pub fn parse_ohlcv_reader<R: Read>(reader: R, origin: &Path) -> Result<Vec<PriceBar>> {
    let table = read_table(reader, origin, OHLCV_COLUMNS[0], &OHLCV_COLUMNS[1..], Span::default())?;
    let (context, dates, rows) = trim_incomplete(table)?;
    let mut bars = Vec::with_capacity(rows.len());
    for (row, (date, v)) in dates.into_iter().zip(rows).enumerate() {
        let bar = PriceBar {
            date,
            open: v[0],
            high: v[1],
            low: v[2],
            close: v[3],
            adj_close: v[4],
            volume: v[5],
        };
        let problem = if !(bar.adj_close > 0.0) {
            Some("adjusted close must be positive")
        } else if bar.volume < 0.0 {
            Some("volume must be non-negative")
        } else if bar.low > bar.open.min(bar.close) || bar.high < bar.open.max(bar.close) {
            Some("high/low inconsistent with open/close")
        } else {
            None
        };
        if let Some(message) = problem {
            return Err(Error::DataRow {
                context,
                row,
                message: format!("{message} ({date})"),
            });
        }
        bars.push(bar);
    }
    Ok(bars)
}

pub fn write_ohlcv_csv<W: Write>(bars: &[PriceBar], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(OHLCV_COLUMNS)?;
    for b in bars {
        w.write_record([
            b.date.to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.adj_close.to_string(),
            b.volume.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_gw_csv(path: &Path, columns: &GwColumnMap, span: Span) -> Result<Vec<RawFundamentalsRow>> {
    let file = std::fs::File::open(path)?;
    parse_gw_reader(file, path, columns, span)
}

pub fn parse_gw_reader<R: Read>(
    reader: R,
    origin: &Path,
    columns: &GwColumnMap,
    span: Span,
) -> Result<Vec<RawFundamentalsRow>> {
    let table = read_table(reader, origin, &columns.date, &columns.value_columns(), span)?;
    let (context, dates, rows) = trim_incomplete(table)?;
    let mut out = Vec::with_capacity(rows.len());
    for (row, (date, v)) in dates.into_iter().zip(rows).enumerate() {
        for (k, name) in [(0, &columns.index_level), (1, &columns.dividends_12m), (2, &columns.earnings_12m)] {
            if !(v[k] > 0.0) {
                return Err(Error::DataRow {
                    context,
                    row,
                    message: format!("`{name}` must be positive for the log transform ({date})"),
                });
            }
        }
        out.push(RawFundamentalsRow {
            date,
            index_level: v[0],
            dividends_12m: v[1],
            earnings_12m: v[2],
            book_to_market: v[3],
            ntis: v[4],
            tbl: v[5],
            lty: v[6],
            ltr: v[7],
            corp_bond_return: v[8],
            baa_yield: v[9],
            aaa_yield: v[10],
            cpi: v[11],
            svar: v[12],
        });
    }
    Ok(out)
}

pub fn write_gw_csv<W: Write>(rows: &[RawFundamentalsRow], columns: &GwColumnMap, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![columns.date.as_str()];
    header.extend(columns.value_columns());
    w.write_record(&header)?;
    for r in rows {
        let vals = [
            r.index_level,
            r.dividends_12m,
            r.earnings_12m,
            r.book_to_market,
            r.ntis,
            r.tbl,
            r.lty,
            r.ltr,
            r.corp_bond_return,
            r.baa_yield,
            r.aaa_yield,
            r.cpi,
            r.svar,
        ];
        let mut rec = vec![r.date.yyyymm().to_string()];
        rec.extend(vals.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Adjusted-close and volume series from a contiguous bar sequence.
pub fn price_and_volume(bars: &[PriceBar]) -> Result<(MonthlySeries, MonthlySeries)> {
    let start = bars
        .first()
        .ok_or_else(|| Error::domain("no price bars"))?
        .date;
    let prices = MonthlySeries::new("adj_close", start, bars.iter().map(|b| b.adj_close).collect())?;
    let volumes = MonthlySeries::new("volume", start, bars.iter().map(|b| b.volume).collect())?;
    Ok((prices, volumes))
}

/// Monthly log returns; the value dated `t + 1` is `ln(P[t+1] / P[t])`.
pub fn log_returns(prices: &MonthlySeries) -> Result<MonthlySeries> {
    if prices.len() < 2 {
        return Err(Error::domain("log returns need at least two prices"));
    }
    if let Some(i) = prices.values.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::domain(format!(
            "non-positive price {} at {}",
            prices.values[i],
            prices.date_at(i)
        )));
    }
    let values = prices.values.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    MonthlySeries::new(format!("{}_logret", prices.name), prices.start.succ(), values)
}
