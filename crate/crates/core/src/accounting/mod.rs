//! Observable series of the model: reserve growth net of purchases, per-currency
//! investment returns, exchange-rate drift, and the observation scale.

mod obs_vol;
mod rates;

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

pub use obs_vol::{build_observations, scale_obs_vol, sdr_quarterly_vol, MIN_DAILY_OBS};
pub use rates::{
    build_return_panel, drifted_shares, equity_quarterly_return, growth_rate, nonpurchase_rate,
    zero_coupon_quarterly_return,
};

/// Calendar quarter, ordered by year then quarter number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    year: i32,
    q: u8,
}

impl Quarter {
    pub fn new(year: i32, q: u8) -> Result<Self> {
        if !(1..=4).contains(&q) {
            return Err(Error::invalid("quarter", format!("quarter number {q} not in 1..4")));
        }
        Ok(Self { year, q })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn q(self) -> u8 {
        self.q
    }

    pub fn next(self) -> Self {
        if self.q == 4 {
            Self { year: self.year + 1, q: 1 }
        } else {
            Self { year: self.year, q: self.q + 1 }
        }
    }

    pub fn prev(self) -> Self {
        if self.q == 1 {
            Self { year: self.year - 1, q: 4 }
        } else {
            Self { year: self.year, q: self.q - 1 }
        }
    }

    pub fn of_date(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            q: ((date.month0() / 3) + 1) as u8,
        }
    }

    /// Inclusive range `start..=end`; empty when `end < start`.
    pub fn range(start: Quarter, end: Quarter) -> Vec<Quarter> {
        let mut out = Vec::new();
        let mut cur = start;
        while cur <= end {
            out.push(cur);
            cur = cur.next();
        }
        out
    }

    /// Number of quarters from `self` to `other` (negative if `other` is earlier).
    pub fn offset_to(self, other: Quarter) -> i64 {
        (other.year as i64 * 4 + other.q as i64) - (self.year as i64 * 4 + self.q as i64)
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.q)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    /// Parses the canonical `YYYYQn` key (case-insensitive `q`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid("quarter", format!("`{s}` is not of the form YYYYQn"));
        let (year, q) = s.split_once(['Q', 'q']).ok_or_else(bad)?;
        if year.len() != 4 || q.len() != 1 {
            return Err(bad());
        }
        let year: i32 = year.parse().map_err(|_| bad())?;
        let q: u8 = q.parse().map_err(|_| bad())?;
        Quarter::new(year, q).map_err(|_| bad())
    }
}

/// Ordered currency identifiers; the US dollar must be present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurrencySet {
    codes: Vec<String>,
    usd_index: usize,
}

impl CurrencySet {
    pub fn new<S: AsRef<str>>(codes: &[S]) -> Result<Self> {
        let codes: Vec<String> = codes.iter().map(|c| c.as_ref().trim().to_ascii_uppercase()).collect();
        if codes.iter().any(String::is_empty) {
            return Err(Error::invalid("currencies", "empty currency code"));
        }
        for (i, c) in codes.iter().enumerate() {
            if codes[..i].contains(c) {
                return Err(Error::invalid("currencies", format!("duplicate currency {c}")));
            }
        }
        let usd_index = codes
            .iter()
            .position(|c| c == "USD")
            .ok_or_else(|| Error::invalid("currencies", "USD must be one of the currencies"))?;
        Ok(Self { codes, usd_index })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn usd_index(&self) -> usize {
        self.usd_index
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.codes.iter().position(|c| c.eq_ignore_ascii_case(code))
    }
}

/// Quarterly reserve stock `W` and net purchases `C` (flow during the quarter), both in USD.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservePanel {
    quarters: Vec<Quarter>,
    reserves: Vec<f64>,
    purchases: Vec<f64>,
}

impl ReservePanel {
    pub fn new(quarters: Vec<Quarter>, reserves: Vec<f64>, purchases: Vec<f64>) -> Result<Self> {
        if quarters.len() != reserves.len() || quarters.len() != purchases.len() {
            return Err(Error::invalid("reserves", "quarter, W and C columns differ in length"));
        }
        check_contiguous(&quarters)?;
        if let Some((q, w)) = quarters.iter().zip(&reserves).find(|(_, w)| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("reserves", format!("W at {q} is {w}, must be positive")));
        }
        if let Some((q, _)) = quarters.iter().zip(&purchases).find(|(_, c)| !c.is_finite()) {
            return Err(Error::invalid("reserves", format!("C at {q} is not finite")));
        }
        Ok(Self { quarters, reserves, purchases })
    }

    pub fn quarters(&self) -> &[Quarter] {
        &self.quarters
    }

    pub fn reserves(&self) -> &[f64] {
        &self.reserves
    }

    pub fn purchases(&self) -> &[f64] {
        &self.purchases
    }

    pub fn len(&self) -> usize {
        self.quarters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quarters.is_empty()
    }
}

/// Bond maturity, stored in whole months so it can key a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Maturity(u32);

impl Maturity {
    pub fn from_years(years: f64) -> Result<Self> {
        if !years.is_finite() || years < 0.25 {
            return Err(Error::invalid("maturity_years", format!("{years} is below one quarter")));
        }
        let months = (years * 12.0).round();
        if (months / 12.0 - years).abs() > 1e-9 {
            return Err(Error::invalid("maturity_years", format!("{years} is not a whole number of months")));
        }
        Ok(Self(months as u32))
    }

    pub fn years(self) -> f64 {
        self.0 as f64 / 12.0
    }
}

impl fmt::Display for Maturity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.years())
    }
}

/// Market data aligned on a quarter grid and a [`CurrencySet`].
///
/// All per-currency tables are indexed `[quarter][currency]`. Yields are
/// end-of-quarter annualized zero-coupon yields; a currency without a curve at
/// some maturity holds `None` for that maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPanel {
    pub quarters: Vec<Quarter>,
    pub currencies: CurrencySet,
    /// USD per unit of currency.
    pub fx: Vec<Vec<f64>>,
    pub yields: std::collections::BTreeMap<Maturity, Vec<Option<Vec<f64>>>>,
    /// Local-currency equity total-return index levels.
    pub equity: Vec<Vec<f64>>,
    /// Daily SDR/USD rates, sorted by date.
    pub daily_sdr: Vec<(NaiveDate, f64)>,
}

impl MarketPanel {
    /// Yield series for `currency` at `maturity`, if the panel has one.
    pub fn yield_series(&self, maturity: Maturity, currency: usize) -> Option<&[f64]> {
        self.yields.get(&maturity)?.get(currency)?.as_deref()
    }
}

/// Per-quarter local-currency returns and exchange-rate growth, indexed `[t][currency]`.
///
/// Row `t` describes the quarter ending at `quarters[t]`: bond and equity
/// returns earned over that quarter and the change in the exchange rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub quarters: Vec<Quarter>,
    pub bond: Vec<Vec<f64>>,
    pub equity: Vec<Vec<f64>>,
    pub fx_growth: Vec<Vec<f64>>,
}

impl ReturnPanel {
    pub fn new(
        quarters: Vec<Quarter>,
        bond: Vec<Vec<f64>>,
        equity: Vec<Vec<f64>>,
        fx_growth: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let t = quarters.len();
        if bond.len() != t || equity.len() != t || fx_growth.len() != t {
            return Err(Error::invalid("returns", "return tables do not match the quarter count"));
        }
        let width = bond.first().map_or(0, Vec::len);
        for (name, table) in [("bond", &bond), ("equity", &equity), ("fx", &fx_growth)] {
            for (q, row) in quarters.iter().zip(table.iter()) {
                if row.len() != width {
                    return Err(Error::invalid("returns", format!("{name} row at {q} has the wrong width")));
                }
                if let Some(v) = row.iter().find(|v| !v.is_finite() || **v <= -1.0) {
                    return Err(Error::invalid("returns", format!("{name} return {v} at {q} is not above -1")));
                }
            }
        }
        Ok(Self { quarters, bond, equity, fx_growth })
    }

    pub fn len(&self) -> usize {
        self.quarters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quarters.is_empty()
    }

    pub fn n_currencies(&self) -> usize {
        self.bond.first().map_or(0, Vec::len)
    }

    pub fn row(&self, t: usize) -> ReturnRow<'_> {
        ReturnRow {
            bond: &self.bond[t],
            equity: &self.equity[t],
            fx_growth: &self.fx_growth[t],
        }
    }
}

/// One quarter of a [`ReturnPanel`].
#[derive(Debug, Clone, Copy)]
pub struct ReturnRow<'a> {
    pub bond: &'a [f64],
    pub equity: &'a [f64],
    pub fx_growth: &'a [f64],
}

/// Non-purchase rate of change `y` and its observation scale, per quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    pub quarters: Vec<Quarter>,
    pub y: Vec<f64>,
    pub sigma_obs: Vec<f64>,
}

impl ObservationSeries {
    pub fn new(quarters: Vec<Quarter>, y: Vec<f64>, sigma_obs: Vec<f64>) -> Result<Self> {
        if quarters.len() != y.len() || quarters.len() != sigma_obs.len() {
            return Err(Error::invalid("observations", "quarter, y and sigma_obs differ in length"));
        }
        if let Some((q, s)) = quarters.iter().zip(&sigma_obs).find(|(_, s)| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("observations", format!("sigma_obs at {q} is {s}, must be positive")));
        }
        Ok(Self { quarters, y, sigma_obs })
    }

    pub fn len(&self) -> usize {
        self.quarters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quarters.is_empty()
    }

    /// Same observations with every scale multiplied by `factor`.
    pub fn with_scaled_sigma(&self, factor: f64) -> Self {
        Self {
            quarters: self.quarters.clone(),
            y: self.y.clone(),
            sigma_obs: self.sigma_obs.iter().map(|s| s * factor).collect(),
        }
    }
}

pub(crate) fn check_contiguous(quarters: &[Quarter]) -> Result<()> {
    for w in quarters.windows(2) {
        if w[1] != w[0].next() {
            return Err(Error::invalid(
                "quarters",
                format!("quarters not contiguous: {} followed by {}", w[0], w[1]),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_parse_and_order() {
        let q: Quarter = "2015Q1".parse().unwrap();
        assert_eq!(q.to_string(), "2015Q1");
        assert_eq!(q.prev().to_string(), "2014Q4");
        assert_eq!(q.prev().next(), q);
        assert!("2015Q5".parse::<Quarter>().is_err());
        assert!("15Q1".parse::<Quarter>().is_err());
        assert!(Quarter::new(2014, 4).unwrap() < q);
        assert_eq!(Quarter::new(2014, 4).unwrap().offset_to(q), 1);
    }

    #[test]
    fn quarter_of_date() {
        let d = NaiveDate::from_ymd_opt(2022, 9, 30).unwrap();
        assert_eq!(Quarter::of_date(d).to_string(), "2022Q3");
        let d = NaiveDate::from_ymd_opt(2022, 10, 1).unwrap();
        assert_eq!(Quarter::of_date(d).to_string(), "2022Q4");
    }

    #[test]
    fn range_is_inclusive() {
        let a: Quarter = "2019Q3".parse().unwrap();
        let b: Quarter = "2020Q2".parse().unwrap();
        let r = Quarter::range(a, b);
        assert_eq!(r.len(), 4);
        assert_eq!(r[3], b);
        assert!(Quarter::range(b, a).is_empty());
    }

    #[test]
    fn currency_set_requires_usd_and_uniqueness() {
        assert!(CurrencySet::new(&["EUR", "JPY"]).is_err());
        assert!(CurrencySet::new(&["USD", "EUR", "usd"]).is_err());
        let set = CurrencySet::new(&["eur", "USD"]).unwrap();
        assert_eq!(set.usd_index(), 1);
        assert_eq!(set.index_of("EUR"), Some(0));
    }

    #[test]
    fn reserve_panel_validation() {
        let qs = Quarter::range("2020Q1".parse().unwrap(), "2020Q2".parse().unwrap());
        assert!(ReservePanel::new(qs.clone(), vec![100.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(ReservePanel::new(qs.clone(), vec![100.0, 101.0], vec![0.0, 0.0]).is_ok());
        let gap = vec![qs[0], qs[1].next()];
        assert!(ReservePanel::new(gap, vec![100.0, 101.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn maturity_months() {
        assert_eq!(Maturity::from_years(7.0).unwrap().years(), 7.0);
        assert!(Maturity::from_years(0.1).is_err());
        assert_eq!(Maturity::from_years(0.25).unwrap().years(), 0.25);
    }
}
