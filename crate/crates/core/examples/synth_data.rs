//! Writes the bundled synthetic monthly sample into `data/`.
//!
//! `cargo run -p stockhpo --example synth_data -- [OUT_DIR] [SEED]`
//!
//! Returns follow a trend rule: the month after the index closes above its
//! 12-month average has a higher expected return. Fundamentals are persistent
//! processes with no bearing on future returns.

use std::fs::File;
use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use stockhpo::date::YearMonth;
use stockhpo::market_data::{write_gw_csv, write_ohlcv_csv, GwColumnMap, PriceBar, RawFundamentalsRow};
use stockhpo::seed::rng_from;

const MONTHS: usize = 816;
const BASE_DRIFT: f64 = 0.005;
const TREND_EFFECT: f64 = 0.0065;
const NOISE_SD: f64 = 0.04;

fn ar1(prev: f64, mean: f64, phi: f64, shock: f64) -> f64 {
    mean + phi * (prev - mean) + shock
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20171231);
    std::fs::create_dir_all(&out)?;

    let mut rng = rng_from(seed, &[]);
    let z = Normal::new(0.0, 1.0)?;
    let start = YearMonth::new(1950, 1)?;

    let mut price = 17.0_f64;
    let mut closes: Vec<f64> = Vec::with_capacity(MONTHS);
    let mut log_volume = 14.0_f64;
    let mut bars = Vec::with_capacity(MONTHS);

    let mut div = 0.6_f64;
    let mut earn = 1.2_f64;
    let mut bm = 0.7_f64;
    let mut ntis = 0.01_f64;
    let mut tbl = 0.02_f64;
    let mut term = 0.01_f64;
    let mut credit = 0.007_f64;
    let mut cpi = 24.0_f64;
    let mut gw = Vec::with_capacity(MONTHS);

    for t in 0..MONTHS {
        let date = start.add_months(t as i32);
        let above_trend = if closes.len() >= 12 {
            let avg = closes[closes.len() - 12..].iter().sum::<f64>() / 12.0;
            closes[closes.len() - 1] >= avg
        } else {
            true
        };
        let signal = if above_trend { 1.0 } else { -1.0 };
        let shock = NOISE_SD * z.sample(&mut rng);
        let r = BASE_DRIFT + TREND_EFFECT * signal + shock;
        let open = price;
        price *= r.exp();
        let spread = 0.01 + 0.02 * rng.gen::<f64>();
        let high = open.max(price) * (1.0 + spread);
        let low = open.min(price) * (1.0 - spread);
        log_volume = ar1(log_volume, 14.0 + 0.004 * t as f64, 0.9, 0.15 * z.sample(&mut rng) + 2.0 * shock.abs());
        bars.push(PriceBar {
            date,
            open,
            high,
            low,
            close: price,
            adj_close: price,
            volume: log_volume.exp().round(),
        });
        closes.push(price);

        div *= (0.0045 + 0.01 * z.sample(&mut rng)).exp();
        earn *= (0.005 + 0.03 * z.sample(&mut rng)).exp();
        bm = ar1(bm, 0.55, 0.99, 0.02 * z.sample(&mut rng)).max(0.05);
        ntis = ar1(ntis, 0.01, 0.97, 0.004 * z.sample(&mut rng));
        tbl = ar1(tbl, 0.045, 0.99, 0.003 * z.sample(&mut rng)).max(0.0001);
        term = ar1(term, 0.015, 0.96, 0.002 * z.sample(&mut rng));
        credit = ar1(credit, 0.01, 0.95, 0.0008 * z.sample(&mut rng)).max(0.002);
        cpi *= (0.003 + 0.003 * z.sample(&mut rng)).exp();
        let lty = (tbl + term).max(0.001);
        let aaa = lty + 0.005;
        let ltr = 0.005 + 0.025 * z.sample(&mut rng);
        gw.push(RawFundamentalsRow {
            date,
            index_level: price,
            dividends_12m: div,
            earnings_12m: earn,
            book_to_market: bm,
            ntis,
            tbl,
            lty,
            ltr,
            corp_bond_return: ltr + 0.005 + 0.01 * z.sample(&mut rng),
            baa_yield: aaa + credit,
            aaa_yield: aaa,
            cpi,
            svar: shock * shock / 3.0 + 0.0005 * rng.gen::<f64>(),
        });
    }

    write_ohlcv_csv(&bars, File::create(out.join("sp500_monthly.csv"))?)?;
    write_gw_csv(&gw, &GwColumnMap::default(), File::create(out.join("gw_monthly.csv"))?)?;
    println!("wrote {} months to {}", MONTHS, out.display());
    Ok(())
}
