//! The 14 Goyal–Welch fundamental predictors.

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureTable;
use crate::date::YearMonth;
use crate::error::{Error, Result};
use crate::market_data::{MonthlySeries, RawFundamentalsRow};

pub const FUNDAMENTAL_COLUMNS: [&str; 14] = [
    "DP", "DY", "EP", "DE", "SVAR", "BM", "NTIS", "TBL", "LTY", "LTR", "TMS", "DFY", "DFR", "INFL",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FundamentalOptions {
    /// Use last month's CPI change as INFL, mirroring the one-month CPI release lag.
    pub lag_inflation: bool,
    /// Treat the dividend and earnings columns as monthly flows and form
    /// 12-month moving sums here instead of using published sums.
    pub resum_flows: bool,
}

impl Default for FundamentalOptions {
    fn default() -> Self {
        FundamentalOptions {
            lag_inflation: true,
            resum_flows: false,
        }
    }
}

/// The 14 predictors over a common date range, in canonical column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalSet {
    pub start: YearMonth,
    pub columns: Vec<MonthlySeries>,
}

impl FundamentalSet {
    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty() || self.columns[0].is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&MonthlySeries> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn to_table(&self) -> Result<FeatureTable> {
        let n = self.len();
        let dates = (0..n).map(|i| self.start.add_months(i as i32)).collect();
        let rows = (0..n).map(|i| self.columns.iter().map(|c| c.values[i]).collect()).collect();
        FeatureTable::new(dates, self.columns.iter().map(|c| c.name.clone()).collect(), rows)
    }
}

fn ln_checked(v: f64, var: &str, date: YearMonth) -> Result<f64> {
    if v > 0.0 {
        Ok(v.ln())
    } else {
        Err(Error::DataDate {
            context: format!("log of {var}"),
            date,
            message: format!("non-positive value {v}"),
        })
    }
}

fn moving_sum_12(x: &[f64]) -> Vec<f64> {
    x.windows(12).map(|w| w.iter().sum()).collect()
}

pub fn build_fundamentals(raw: &[RawFundamentalsRow], opts: FundamentalOptions) -> Result<FundamentalSet> {
    if raw.windows(2).any(|w| w[1].date != w[0].date.succ()) {
        return Err(Error::domain("fundamental rows must be contiguous months"));
    }
    let rows: Vec<RawFundamentalsRow> = if opts.resum_flows {
        if raw.len() < 12 {
            return Err(Error::domain("re-summing flows needs at least 12 months"));
        }
        let d: Vec<f64> = raw.iter().map(|r| r.dividends_12m).collect();
        let e: Vec<f64> = raw.iter().map(|r| r.earnings_12m).collect();
        raw[11..]
            .iter()
            .zip(moving_sum_12(&d).into_iter().zip(moving_sum_12(&e)))
            .map(|(r, (d12, e12))| RawFundamentalsRow {
                dividends_12m: d12,
                earnings_12m: e12,
                ..r.clone()
            })
            .collect()
    } else {
        raw.to_vec()
    };

    let infl_offset = if opts.lag_inflation { 2 } else { 1 };
    if rows.len() <= infl_offset {
        return Err(Error::domain(format!(
            "need more than {infl_offset} months of fundamentals, got {}",
            rows.len()
        )));
    }

    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(rows.len()); FUNDAMENTAL_COLUMNS.len()];
    for t in infl_offset..rows.len() {
        let r = &rows[t];
        let d = r.date;
        let ln_d = ln_checked(r.dividends_12m, "D12", d)?;
        let ln_e = ln_checked(r.earnings_12m, "E12", d)?;
        let ln_p = ln_checked(r.index_level, "Index", d)?;
        let ln_p_prev = ln_checked(rows[t - 1].index_level, "Index", rows[t - 1].date)?;
        let (cpi_now, cpi_prev) = if opts.lag_inflation {
            (&rows[t - 1], &rows[t - 2])
        } else {
            (&rows[t], &rows[t - 1])
        };
        let infl = ln_checked(cpi_now.cpi, "CPI", cpi_now.date)? - ln_checked(cpi_prev.cpi, "CPI", cpi_prev.date)?;
        let values = [
            ln_d - ln_p,
            ln_d - ln_p_prev,
            ln_e - ln_p,
            ln_d - ln_e,
            r.svar,
            r.book_to_market,
            r.ntis,
            r.tbl,
            r.lty,
            r.ltr,
            r.lty - r.tbl,
            r.baa_yield - r.aaa_yield,
            r.corp_bond_return - r.ltr,
            infl,
        ];
        for (c, v) in cols.iter_mut().zip(values) {
            if !v.is_finite() {
                return Err(Error::DataDate {
                    context: "fundamentals".into(),
                    date: d,
                    message: "non-finite input".into(),
                });
            }
            c.push(v);
        }
    }
    let start = rows[infl_offset].date;
    let columns = FUNDAMENTAL_COLUMNS
        .iter()
        .zip(cols)
        .map(|(name, values)| MonthlySeries::new(*name, start, values))
        .collect::<Result<Vec<_>>>()?;
    Ok(FundamentalSet { start, columns })
}

/// True when `DE = DP - EP` holds at every date to within `1e-10`.
pub fn algebraic_identity_check(set: &FundamentalSet) -> bool {
    let (Some(dp), Some(ep), Some(de)) = (set.column("DP"), set.column("EP"), set.column("DE")) else {
        return false;
    };
    dp.values
        .iter()
        .zip(&ep.values)
        .zip(&de.values)
        .all(|((dp, ep), de)| (de - (dp - ep)).abs() <= 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(date: YearMonth, p: f64, d12: f64, e12: f64, cpi: f64) -> RawFundamentalsRow {
        RawFundamentalsRow {
            date,
            index_level: p,
            dividends_12m: d12,
            earnings_12m: e12,
            book_to_market: 0.6,
            ntis: 0.02,
            tbl: 0.03,
            lty: 0.05,
            ltr: 0.004,
            corp_bond_return: 0.006,
            baa_yield: 0.07,
            aaa_yield: 0.06,
            cpi,
            svar: 0.002,
        }
    }

    fn ym(y: i32, m: u32) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    #[test]
    fn hand_computed_three_rows() {
        let raw = vec![
            row(ym(1950, 1), 17.0, 1.5, 2.3, 23.5),
            row(ym(1950, 2), 17.2, 1.6, 2.4, 23.6),
            row(ym(1950, 3), 17.5, 1.7, 2.2, 23.9),
        ];
        let no_lag = FundamentalOptions {
            lag_inflation: false,
            resum_flows: false,
        };
        let set = build_fundamentals(&raw, no_lag).unwrap();
        assert_eq!(set.start, ym(1950, 2));
        assert_eq!(set.len(), 2);
        let t = set.to_table().unwrap();
        let r = &raw[2];
        let want = [
            1.7f64.ln() - 17.5f64.ln(),
            1.7f64.ln() - 17.2f64.ln(),
            2.2f64.ln() - 17.5f64.ln(),
            1.7f64.ln() - 2.2f64.ln(),
            r.svar,
            r.book_to_market,
            r.ntis,
            r.tbl,
            r.lty,
            r.ltr,
            0.05 - 0.03,
            0.07 - 0.06,
            0.006 - 0.004,
            (23.9f64 / 23.6).ln(),
        ];
        for (c, w) in want.iter().enumerate() {
            assert!((t.rows[1][c] - w).abs() < 1e-12, "{}", FUNDAMENTAL_COLUMNS[c]);
        }

        let lagged = build_fundamentals(&raw, FundamentalOptions::default()).unwrap();
        assert_eq!(lagged.start, ym(1950, 3));
        let infl = lagged.column("INFL").unwrap().values[0];
        assert!((infl - (23.6f64 / 23.5).ln()).abs() < 1e-15);
    }

    #[test]
    fn log_identities() {
        let mut raw: Vec<_> = (0..4).map(|i| row(ym(1970, 1).add_months(i), 50.0, 50.0, 3.0, 40.0)).collect();
        raw.iter_mut().for_each(|r| {
            r.lty = 0.05;
            r.tbl = 0.05;
            r.baa_yield = r.aaa_yield;
        });
        let set = build_fundamentals(&raw, FundamentalOptions::default()).unwrap();
        assert!(set.column("DP").unwrap().values.iter().all(|&v| v == 0.0));
        assert!(set.column("TMS").unwrap().values.iter().all(|&v| v == 0.0));
        assert!(set.column("DFY").unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_positive_log_input_names_variable_and_date() {
        let mut raw: Vec<_> = (0..4).map(|i| row(ym(1970, 1).add_months(i), 50.0, 2.0, 3.0, 40.0)).collect();
        raw[3].cpi = 0.0;
        let opts = FundamentalOptions {
            lag_inflation: false,
            resum_flows: false,
        };
        match build_fundamentals(&raw, opts).unwrap_err() {
            Error::DataDate { context, date, .. } => {
                assert!(context.contains("CPI"));
                assert_eq!(date, ym(1970, 4));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn identity_check_detects_perturbation() {
        let raw: Vec<_> = (0..10)
            .map(|i| row(ym(1980, 1).add_months(i), 100.0 + i as f64, 3.0 + 0.1 * i as f64, 5.0, 80.0))
            .collect();
        let mut set = build_fundamentals(&raw, FundamentalOptions::default()).unwrap();
        assert!(algebraic_identity_check(&set));
        set.columns[3].values[4] += 1e-3;
        assert!(!algebraic_identity_check(&set));
    }

    #[test]
    fn resumming_flows() {
        let raw: Vec<_> = (0..15).map(|i| row(ym(1980, 1).add_months(i), 100.0, 0.25, 0.5, 80.0)).collect();
        let opts = FundamentalOptions {
            lag_inflation: false,
            resum_flows: true,
        };
        let set = build_fundamentals(&raw, opts).unwrap();
        // first summed row is Dec 1980; one more month lost to DY
        assert_eq!(set.start, ym(1981, 1));
        let de = set.column("DE").unwrap().values[0];
        assert!((de - (3.0f64 / 6.0).ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn dy_minus_dp_is_monthly_log_price_change(
            prices in prop::collection::vec(1.0f64..5000.0, 4..30),
            d in 0.1f64..100.0,
            e in 0.1f64..200.0,
        ) {
            let raw: Vec<_> = prices.iter().enumerate()
                .map(|(i, &p)| row(ym(1990, 1).add_months(i as i32), p, d, e, 100.0))
                .collect();
            let set = build_fundamentals(&raw, FundamentalOptions::default()).unwrap();
            prop_assert!(algebraic_identity_check(&set));
            prop_assert_eq!(set.len(), prices.len() - 2);
            let dy = &set.column("DY").unwrap().values;
            let dp = &set.column("DP").unwrap().values;
            for i in 0..set.len() {
                let t = i + 2;
                let want = prices[t].ln() - prices[t - 1].ln();
                prop_assert!((dy[i] - dp[i] - want).abs() <= 1e-10);
            }
        }
    }
}
