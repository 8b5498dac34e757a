//! Calendar months.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A calendar month, stored as a month count since year 0.
///
/// Serializes as the integer `YYYYMM` (e.g. `195001`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth(i32);

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::domain(format!("month {month} out of range")));
        }
        Ok(YearMonth(year * 12 + month as i32 - 1))
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    pub fn month(self) -> u32 {
        (self.0.rem_euclid(12) + 1) as u32
    }

    /// The `YYYYMM` integer form.
    pub fn yyyymm(self) -> i32 {
        self.year() * 100 + self.month() as i32
    }

    pub fn from_yyyymm(v: i64) -> Result<Self> {
        let year = v / 100;
        let month = v % 100;
        if !(0..=9999).contains(&year) || !(1..=12).contains(&month) {
            return Err(Error::domain(format!("invalid yyyymm value {v}")));
        }
        YearMonth::new(year as i32, month as u32)
    }

    pub fn add_months(self, n: i32) -> Self {
        YearMonth(self.0 + n)
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    pub fn pred(self) -> Self {
        self.add_months(-1)
    }

    /// Signed number of months from `earlier` to `self`.
    pub fn months_since(self, earlier: YearMonth) -> i32 {
        self.0 - earlier.0
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

/// Accepts `YYYY-MM-DD`, `YYYY-MM`, `YYYY/MM/DD` and `YYYYMM`.
impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::domain(format!("unparsable date `{s}`"));
        if s.len() == 6 && s.bytes().all(|b| b.is_ascii_digit()) {
            return YearMonth::from_yyyymm(s.parse().map_err(|_| bad())?);
        }
        let mut parts = s.split(['-', '/']);
        let year: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let month: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if let Some(day) = parts.next() {
            let day: u32 = day.parse().map_err(|_| bad())?;
            if !(1..=31).contains(&day) {
                return Err(bad());
            }
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        YearMonth::new(year, month).map_err(|_| bad())
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_i32(self.yyyymm())
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(v) => YearMonth::from_yyyymm(v).map_err(serde::de::Error::custom),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        let want = YearMonth::new(1950, 1).unwrap();
        for s in ["1950-01-03", "1950-01", "195001", "1950/1/31"] {
            assert_eq!(s.parse::<YearMonth>().unwrap(), want, "{s}");
        }
        assert!("1950-13".parse::<YearMonth>().is_err());
        assert!("19500".parse::<YearMonth>().is_err());
    }

    #[test]
    fn month_arithmetic_crosses_years() {
        let d = YearMonth::new(1999, 12).unwrap();
        assert_eq!(d.succ(), YearMonth::new(2000, 1).unwrap());
        assert_eq!(YearMonth::new(2017, 12).unwrap().months_since(YearMonth::new(1950, 1).unwrap()), 815);
        assert_eq!(d.yyyymm(), 199912);
        assert_eq!(d.to_string(), "1999-12");
    }

    #[test]
    fn serde_uses_yyyymm() {
        let d = YearMonth::new(2004, 6).unwrap();
        assert_eq!(serde_json::to_string(&d).unwrap(), "200406");
        assert_eq!(serde_json::from_str::<YearMonth>("\"2004-06\"").unwrap(), d);
    }
}
