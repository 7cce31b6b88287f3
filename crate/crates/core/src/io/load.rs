//! CSV ingestion and alignment onto one quarter grid and currency set.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use csv::StringRecord;

use crate::accounting::{CurrencySet, Maturity, MarketPanel, Quarter, ReservePanel};
use crate::equity_share::CoferShares;
use crate::error::{Error, Result};
use crate::io::config::RunConfig;
use crate::particle_filter::ReportedShare;
use crate::simplex::SimplexShares;

// Kept shares this close to one are taken as already normalized, so that a
// written and re-read dataset is unchanged.
const NORMALIZED_TOL: f64 = 1e-12;

/// World-share mass outside the currency set for one quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct CoferResidual {
    pub quarter: Quarter,
    /// Shares of the set currencies as read, before renormalizing.
    pub kept: Vec<f64>,
    /// Share of currencies outside the set, dropped before renormalizing.
    pub dropped: f64,
    /// Factor applied to the kept shares.
    pub factor: f64,
}

/// Every input for one country, aligned on `start.prev() ..= end`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryDataset {
    pub currencies: CurrencySet,
    pub reserves: ReservePanel,
    pub market: MarketPanel,
    /// World shares from `start.prev()` through `end.prev()`.
    pub cofer: CoferShares,
    pub cofer_residual: Vec<CoferResidual>,
    /// Sparse self-reported shares; empty when no file was given.
    pub reported: Vec<ReportedShare>,
}

impl CountryDataset {
    /// First filtered quarter.
    pub fn start(&self) -> Quarter {
        self.reserves.quarters()[1]
    }

    pub fn end(&self) -> Quarter {
        *self.reserves.quarters().last().expect("nonempty panel")
    }

    /// The same dataset cut to filtered quarters `start ..= end`.
    pub fn restrict(&self, start: Quarter, end: Quarter) -> Result<Self> {
        let levels = self.reserves.quarters();
        let lo = usize::try_from(levels[0].offset_to(start.prev()))
            .ok()
            .filter(|_| start.offset_to(end) >= 0)
            .ok_or_else(|| Error::config("start", format!("{start} is outside the loaded data")))?;
        let hi = usize::try_from(levels[0].offset_to(end))
            .ok()
            .filter(|i| *i < levels.len())
            .ok_or_else(|| Error::config("end", format!("{end} is outside the loaded data")))?;
        let cut = |v: &[Vec<f64>]| v[lo..=hi].to_vec();
        let reserves = ReservePanel::new(
            levels[lo..=hi].to_vec(),
            self.reserves.reserves()[lo..=hi].to_vec(),
            self.reserves.purchases()[lo..=hi].to_vec(),
        )?;
        let m = &self.market;
        let first_day = quarter_start(start.prev());
        let last_day = quarter_start(end.next());
        let market = MarketPanel {
            quarters: m.quarters[lo..=hi].to_vec(),
            currencies: m.currencies.clone(),
            fx: cut(&m.fx),
            yields: m
                .yields
                .iter()
                .map(|(k, per)| (*k, per.iter().map(|s| s.as_ref().map(|s| s[lo..=hi].to_vec())).collect()))
                .collect(),
            equity: cut(&m.equity),
            daily_sdr: m.daily_sdr.iter().filter(|(d, _)| *d >= first_day && *d < last_day).copied().collect(),
        };
        let c0 = self.cofer.quarters()[0];
        let clo = c0.offset_to(start.prev()) as usize;
        let chi = c0.offset_to(end.prev()) as usize;
        let cofer = CoferShares::new(
            self.cofer.quarters()[clo..=chi].to_vec(),
            self.cofer.shares()[clo..=chi].to_vec(),
        )?;
        Ok(Self {
            currencies: self.currencies.clone(),
            reserves,
            market,
            cofer,
            cofer_residual: self.cofer_residual[clo..=chi].to_vec(),
            reported: self.reported.clone(),
        })
    }
}

pub(crate) fn quarter_start(q: Quarter) -> NaiveDate {
    NaiveDate::from_ymd_opt(q.year(), (q.q() as u32 - 1) * 3 + 1, 1).expect("valid quarter start")
}

struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    rows: Vec<(usize, StringRecord)>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let header = rdr.headers().map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?.clone();
        let columns: HashMap<String, usize> =
            header.iter().enumerate().map(|(i, h)| (h.to_ascii_lowercase(), i)).collect();
        for r in required {
            if !columns.contains_key(&r.to_ascii_lowercase()) {
                return Err(Error::Schema {
                    file: path.to_path_buf(),
                    row: 1,
                    field: r.to_string(),
                    reason: "missing column".into(),
                });
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec));
        }
        Ok(Self { path: path.to_path_buf(), columns, rows })
    }

    fn schema(&self, line: usize, field: &str, reason: impl Into<String>) -> Error {
        Error::Schema { file: self.path.clone(), row: line, field: field.to_string(), reason: reason.into() }
    }

    fn str<'a>(&self, rec: &'a StringRecord, line: usize, field: &str) -> Result<&'a str> {
        let i = self.columns[&field.to_ascii_lowercase()];
        rec.get(i).filter(|s| !s.is_empty()).ok_or_else(|| self.schema(line, field, "empty value"))
    }

    fn num(&self, rec: &StringRecord, line: usize, field: &str) -> Result<f64> {
        let s = self.str(rec, line, field)?;
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.schema(line, field, format!("`{s}` is not a finite number"))),
        }
    }

    fn quarter(&self, rec: &StringRecord, line: usize) -> Result<Quarter> {
        let s = self.str(rec, line, "quarter")?;
        s.parse().map_err(|_| self.schema(line, "quarter", format!("`{s}` is not YYYYQn")))
    }

    fn currency(&self, rec: &StringRecord, line: usize) -> Result<String> {
        Ok(self.str(rec, line, "currency")?.to_ascii_uppercase())
    }
}

/// Per-currency quarterly values keyed by `(quarter, currency)`.
struct Keyed {
    path: PathBuf,
    values: HashMap<(Quarter, String), f64>,
    order: Vec<String>,
}

impl Keyed {
    fn from_table(t: &Table, value: &str) -> Result<Self> {
        let mut values = HashMap::new();
        let mut order: Vec<String> = Vec::new();
        for (line, rec) in &t.rows {
            let q = t.quarter(rec, *line)?;
            let c = t.currency(rec, *line)?;
            let v = t.num(rec, *line, value)?;
            if !order.contains(&c) {
                order.push(c.clone());
            }
            if values.insert((q, c.clone()), v).is_some() {
                return Err(t.schema(*line, "quarter", format!("duplicate row for {q} {c}")));
            }
        }
        Ok(Self { path: t.path.clone(), values, order })
    }

    fn has(&self, currency: &str) -> bool {
        self.order.iter().any(|c| c == currency)
    }

    /// Complete `[quarter][currency]` table, or the first gap.
    fn grid(&self, quarters: &[Quarter], currencies: &[String], implicit_usd: Option<f64>) -> Result<Vec<Vec<f64>>> {
        for c in currencies {
            if !self.has(c) && !(c == "USD" && implicit_usd.is_some()) {
                return Err(Error::MissingCurrency { file: self.path.clone(), currency: c.clone() });
            }
        }
        quarters
            .iter()
            .map(|q| {
                currencies
                    .iter()
                    .map(|c| match self.values.get(&(*q, c.clone())) {
                        Some(v) => Ok(*v),
                        None if c == "USD" && !self.has(c) => Ok(implicit_usd.expect("checked above")),
                        None => Err(Error::Gap { file: self.path.clone(), quarter: *q, currency: Some(c.clone()) }),
                    })
                    .collect()
            })
            .collect()
    }
}

/// Loads and aligns every input named in `config`.
pub fn load_dataset(config: &RunConfig) -> Result<CountryDataset> {
    let paths = &config.data;

    let res = Table::read(&paths.reserves, &["quarter", "W", "C"])?;
    let mut by_q: BTreeMap<Quarter, (f64, f64)> = BTreeMap::new();
    for (line, rec) in &res.rows {
        let q = res.quarter(rec, *line)?;
        let w = res.num(rec, *line, "W")?;
        let c = res.num(rec, *line, "C")?;
        if !(w > 0.0) {
            return Err(res.schema(*line, "W", format!("reserves {w} must be positive")));
        }
        if by_q.insert(q, (w, c)).is_some() {
            return Err(res.schema(*line, "quarter", format!("duplicate quarter {q}")));
        }
    }
    let (first, last) = match (by_q.keys().next(), by_q.keys().next_back()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::Data(format!("{}: no rows", paths.reserves.display()))),
    };
    let start = config.start.unwrap_or(first.next());
    let end = config.end.unwrap_or(last);
    if start.offset_to(end) < 0 {
        return Err(Error::config("end", format!("{end} precedes start {start}")));
    }
    let quarters = Quarter::range(start.prev(), end);
    let mut w = Vec::with_capacity(quarters.len());
    let mut c = Vec::with_capacity(quarters.len());
    for q in &quarters {
        let (wq, cq) = by_q
            .get(q)
            .ok_or_else(|| Error::Gap { file: paths.reserves.clone(), quarter: *q, currency: None })?;
        w.push(*wq);
        c.push(*cq);
    }
    let reserves = ReservePanel::new(quarters.clone(), w, c)?;

    let eq_table = Table::read(&paths.equity, &["quarter", "currency", "index_level"])?;
    let equity_keyed = Keyed::from_table(&eq_table, "index_level")?;
    let codes: Vec<String> = match &config.currencies {
        Some(c) => c.clone(),
        None => equity_keyed.order.clone(),
    };
    if !codes.iter().any(|c| c == "USD") {
        return Err(Error::MissingCurrency { file: paths.equity.clone(), currency: "USD".into() });
    }
    let currencies = CurrencySet::new(&codes)?;
    let codes = currencies.codes().to_vec();
    crate::io::config::validate(&RunConfig { currencies: Some(codes.clone()), ..config.clone() })?;

    let equity = equity_keyed.grid(&quarters, &codes, None)?;
    if let Some((t, row)) = equity.iter().enumerate().find(|(_, r)| r.iter().any(|v| !(*v > 0.0))) {
        let c = row.iter().position(|v| !(*v > 0.0)).expect("found");
        return Err(Error::Data(format!(
            "{}: index level for {} at {} must be positive",
            paths.equity.display(),
            codes[c],
            quarters[t]
        )));
    }

    let rates_table = Table::read(&paths.rates, &["quarter", "currency", "e"])?;
    let fx = Keyed::from_table(&rates_table, "e")?.grid(&quarters, &codes, Some(1.0))?;
    if let Some(row) = fx.iter().position(|r| r.iter().any(|v| !(*v > 0.0))) {
        return Err(Error::Data(format!("{}: nonpositive exchange rate at {}", paths.rates.display(), quarters[row])));
    }

    let y_table = Table::read(&paths.yields, &["quarter", "currency", "maturity_years", "yield"])?;
    let mut by_maturity: BTreeMap<Maturity, Vec<(usize, StringRecord)>> = BTreeMap::new();
    for (line, rec) in &y_table.rows {
        let years = y_table.num(rec, *line, "maturity_years")?;
        let m = Maturity::from_years(years).map_err(|e| y_table.schema(*line, "maturity_years", e.to_string()))?;
        by_maturity.entry(m).or_default().push((*line, rec.clone()));
    }
    let mut yields = BTreeMap::new();
    for (m, rows) in by_maturity {
        let sub = Table { path: y_table.path.clone(), columns: y_table.columns.clone(), rows };
        let keyed = Keyed::from_table(&sub, "yield")?;
        let mut per = Vec::with_capacity(codes.len());
        for code in &codes {
            if !keyed.has(code) {
                per.push(None);
                continue;
            }
            let series = keyed.grid(&quarters, std::slice::from_ref(code), None)?;
            let series: Vec<f64> = series.into_iter().map(|r| r[0]).collect();
            if let Some(t) = series.iter().position(|y| !(*y > -1.0)) {
                return Err(Error::Data(format!(
                    "{}: {m}-year yield for {code} at {} must exceed -1",
                    paths.yields.display(),
                    quarters[t]
                )));
            }
            per.push(Some(series));
        }
        yields.insert(m, per);
    }
    yields.entry(config.maturity).or_insert_with(|| vec![None; codes.len()]);

    let sdr_table = Table::read(&paths.sdr, &["date", "sdr_usd"])?;
    let first_day = quarter_start(start.prev());
    let last_day = quarter_start(end.next());
    let mut daily: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for (line, rec) in &sdr_table.rows {
        let s = sdr_table.str(rec, *line, "date")?;
        let d = NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|_| sdr_table.schema(*line, "date", format!("`{s}` is not YYYY-MM-DD")))?;
        let v = sdr_table.num(rec, *line, "sdr_usd")?;
        if !(v > 0.0) {
            return Err(sdr_table.schema(*line, "sdr_usd", format!("{v} must be positive")));
        }
        if daily.insert(d, v).is_some() {
            return Err(sdr_table.schema(*line, "date", format!("duplicate date {d}")));
        }
    }
    let daily_sdr: Vec<(NaiveDate, f64)> =
        daily.into_iter().filter(|(d, _)| *d >= first_day && *d < last_day).collect();

    let (cofer, cofer_residual) = load_cofer(&paths.cofer, &codes, start.prev(), end.prev())?;

    let reported = if config.reported_required || paths.reported.exists() {
        load_reported(&paths.reported, &currencies)?
    } else {
        Vec::new()
    };

    let market = MarketPanel { quarters, currencies: currencies.clone(), fx, yields, equity, daily_sdr };
    Ok(CountryDataset { currencies, reserves, market, cofer, cofer_residual, reported })
}

fn load_cofer(path: &Path, codes: &[String], first: Quarter, last: Quarter) -> Result<(CoferShares, Vec<CoferResidual>)> {
    let t = Table::read(path, &["quarter", "currency", "share"])?;
    let quarters = Quarter::range(first, last);
    let mut kept = vec![vec![None::<f64>; codes.len()]; quarters.len()];
    let mut dropped = vec![None::<f64>; quarters.len()];
    let mut seen_currency = vec![false; codes.len()];
    for (line, rec) in &t.rows {
        let q = t.quarter(rec, *line)?;
        let code = t.currency(rec, *line)?;
        let v = t.num(rec, *line, "share")?;
        if !(0.0..=1.0).contains(&v) {
            return Err(t.schema(*line, "share", format!("{v} outside [0, 1]")));
        }
        let c = codes.iter().position(|x| *x == code);
        if let Some(c) = c {
            seen_currency[c] = true;
        }
        let Ok(i) = usize::try_from(first.offset_to(q)) else { continue };
        if i >= quarters.len() {
            continue;
        }
        match c {
            Some(c) => {
                if kept[i][c].replace(v).is_some() {
                    return Err(t.schema(*line, "quarter", format!("duplicate row for {q} {code}")));
                }
            }
            // summed in file order so a rewritten single residual row reads back identically
            None => *dropped[i].get_or_insert(0.0) += v,
        }
    }
    if let Some(c) = seen_currency.iter().position(|s| !s) {
        return Err(Error::MissingCurrency { file: path.to_path_buf(), currency: codes[c].clone() });
    }
    let mut shares = Vec::with_capacity(quarters.len());
    let mut residual = Vec::with_capacity(quarters.len());
    for (i, q) in quarters.iter().enumerate() {
        if kept[i].iter().all(Option::is_none) && dropped[i].is_none() {
            return Err(Error::Gap { file: path.to_path_buf(), quarter: *q, currency: None });
        }
        // A set currency absent in some quarter (not yet tracked) holds no share.
        let raw: Vec<f64> = kept[i].iter().map(|v| v.unwrap_or(0.0)).collect();
        let kept_sum: f64 = raw.iter().sum();
        let other = dropped[i].unwrap_or(0.0);
        if !(kept_sum > 0.0) || kept_sum + other > 1.0 + 1e-6 {
            return Err(Error::Data(format!(
                "{}: shares at {q} sum to {} with {kept_sum} in the currency set",
                path.display(),
                kept_sum + other
            )));
        }
        let (s, factor) = if (kept_sum - 1.0).abs() <= NORMALIZED_TOL {
            (SimplexShares::new(raw.clone())?, 1.0)
        } else {
            (SimplexShares::normalize(&raw)?, 1.0 / kept_sum)
        };
        shares.push(s);
        residual.push(CoferResidual { quarter: *q, kept: raw, dropped: other, factor });
    }
    Ok((CoferShares::new(quarters, shares)?, residual))
}

/// Self-reported shares; currencies outside the set are skipped.
pub fn load_reported(path: &Path, currencies: &CurrencySet) -> Result<Vec<ReportedShare>> {
    let t = Table::read(path, &["quarter", "currency", "share"])?;
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line, rec) in &t.rows {
        let quarter = t.quarter(rec, *line)?;
        let code = t.currency(rec, *line)?;
        let share = t.num(rec, *line, "share")?;
        if !(0.0..=1.0).contains(&share) {
            return Err(t.schema(*line, "share", format!("{share} outside [0, 1]")));
        }
        let Some(currency) = currencies.index_of(&code) else { continue };
        if !seen.insert((quarter, currency)) {
            return Err(t.schema(*line, "quarter", format!("duplicate row for {quarter} {code}")));
        }
        out.push(ReportedShare { quarter, currency, share });
    }
    Ok(out)
}
