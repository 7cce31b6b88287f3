//! Run configuration: flat `key = value` lines, `#` starts a comment.
//!
//! Every key is optional. Missing keys take the defaults listed on
//! [`RunConfig`]; data paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::accounting::{Maturity, Quarter};
use crate::equity_share::DEFAULT_HALF_WINDOW;
use crate::error::{Error, Result};
use crate::particle_filter::{DEFAULT_PARTICLES, DEFAULT_QUANTILES};
use crate::state_model::ModelParams;

/// USD standard deviation of the default prior centred on world shares.
pub const DEFAULT_PRIOR_USD_STD: f64 = 0.065;
/// USD standard deviation when the prior mean is pinned to known shares.
pub const DEFAULT_PINNED_USD_STD: f64 = 0.0025;
pub const DEFAULT_MATURITY_YEARS: f64 = 7.0;

const MAX_PARTICLES: usize = 100_000_000;

/// How the initial share distribution is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// Raw Dirichlet parameters in currency order.
    Params(Vec<f64>),
    /// A mean and the USD marginal's standard deviation.
    Mean { mean: PriorMean, usd_std: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorMean {
    /// World shares in the quarter before `start`, floored and renormalized.
    Cofer,
    /// Self-reported shares in the quarter before `start`.
    Reported,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquityShareMode {
    Estimated,
    Fixed(f64),
}

/// Input file locations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPaths {
    pub reserves: PathBuf,
    pub rates: PathBuf,
    pub yields: PathBuf,
    pub equity: PathBuf,
    pub sdr: PathBuf,
    pub cofer: PathBuf,
    /// Optional; only read when present on disk or named explicitly.
    pub reported: PathBuf,
}

impl DataPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            reserves: dir.join("reserves.csv"),
            rates: dir.join("rates.csv"),
            yields: dir.join("yields.csv"),
            equity: dir.join("equity.csv"),
            sdr: dir.join("sdr.csv"),
            cofer: dir.join("cofer.csv"),
            reported: dir.join("reported.csv"),
        }
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Currency codes; defaults to every currency in the equity file.
    pub currencies: Option<Vec<String>>,
    /// First filtered quarter; defaults to the second quarter of the reserves file.
    pub start: Option<Quarter>,
    /// Last filtered quarter; defaults to the last quarter of the reserves file.
    pub end: Option<Quarter>,
    pub n_particles: usize,
    pub model: ModelParams,
    pub maturity: Maturity,
    pub seed: u64,
    pub prior: PriorSpec,
    /// Multiplier on the prior standard deviation.
    pub prior_width: f64,
    pub equity_share: EquityShareMode,
    pub equity_half_window: usize,
    /// Replaces the half-IQR target for the mean observation scale.
    pub sigma_obs_mean: Option<f64>,
    /// Constant quarterly bond return for currencies without a yield curve.
    pub fallback_return: BTreeMap<String, f64>,
    /// Rolling window length for the least-squares baseline; defaults to the currency count.
    pub baseline_window: Option<usize>,
    pub baseline_smoothing: f64,
    pub quantiles: Vec<f64>,
    pub data: DataPaths,
    /// Set when `data.reported` was given explicitly.
    pub reported_required: bool,
}

impl RunConfig {
    /// Defaults with data files expected in `dir`.
    pub fn defaults(dir: &Path) -> Self {
        Self {
            currencies: None,
            start: None,
            end: None,
            n_particles: DEFAULT_PARTICLES,
            model: ModelParams::default(),
            maturity: Maturity::from_years(DEFAULT_MATURITY_YEARS).expect("valid default maturity"),
            seed: 0,
            prior: PriorSpec::Mean { mean: PriorMean::Cofer, usd_std: DEFAULT_PRIOR_USD_STD },
            prior_width: 1.0,
            equity_share: EquityShareMode::Estimated,
            equity_half_window: DEFAULT_HALF_WINDOW,
            sigma_obs_mean: None,
            fallback_return: BTreeMap::new(),
            baseline_window: None,
            baseline_smoothing: 0.0,
            quantiles: DEFAULT_QUANTILES.to_vec(),
            data: DataPaths::in_dir(dir),
            reported_required: false,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        parse_config(&text, dir)
    }

    /// Resolved settings as `key = value` lines, in a stable order.
    ///
    /// Parsing the output with the same base directory reproduces `self`.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        if let Some(c) = &self.currencies {
            m.insert("currencies".into(), c.join(","));
        }
        if let Some(q) = self.start {
            m.insert("start".into(), q.to_string());
        }
        if let Some(q) = self.end {
            m.insert("end".into(), q.to_string());
        }
        m.insert("n_particles".into(), self.n_particles.to_string());
        m.insert("gamma".into(), self.model.gamma.to_string());
        m.insert("floor".into(), self.model.floor.to_string());
        m.insert("alpha_min".into(), self.model.alpha_min.to_string());
        m.insert("distribution".into(), self.model.obs_dist.to_string());
        m.insert("maturity_years".into(), self.maturity.years().to_string());
        m.insert("seed".into(), self.seed.to_string());
        match &self.prior {
            PriorSpec::Params(p) => {
                m.insert("prior.params".into(), list(p));
            }
            PriorSpec::Mean { mean, usd_std } => {
                let v = match mean {
                    PriorMean::Cofer => "cofer".to_string(),
                    PriorMean::Reported => "reported".to_string(),
                    PriorMean::Explicit(v) => list(v),
                };
                m.insert("prior.mean".into(), v);
                m.insert("prior.usd_std".into(), usd_std.to_string());
            }
        }
        m.insert("prior.width".into(), self.prior_width.to_string());
        match self.equity_share {
            EquityShareMode::Estimated => {
                m.insert("equity_share.mode".into(), "estimated".into());
            }
            EquityShareMode::Fixed(x) => {
                m.insert("equity_share.mode".into(), "fixed".into());
                m.insert("equity_share.value".into(), x.to_string());
            }
        }
        m.insert("equity_share.half_window".into(), self.equity_half_window.to_string());
        if let Some(s) = self.sigma_obs_mean {
            m.insert("sigma_obs.mean".into(), s.to_string());
        }
        for (c, r) in &self.fallback_return {
            m.insert(format!("fallback_return.{c}"), r.to_string());
        }
        if let Some(w) = self.baseline_window {
            m.insert("baseline.window".into(), w.to_string());
        }
        m.insert("baseline.smoothing".into(), self.baseline_smoothing.to_string());
        m.insert("quantiles".into(), list(&self.quantiles));
        let d = &self.data;
        for (k, p) in [
            ("reserves", &d.reserves),
            ("rates", &d.rates),
            ("yields", &d.yields),
            ("equity", &d.equity),
            ("sdr", &d.sdr),
            ("cofer", &d.cofer),
        ] {
            m.insert(format!("data.{k}"), p.display().to_string());
        }
        if self.reported_required {
            m.insert("data.reported".into(), d.reported.display().to_string());
        }
        m
    }

    /// [`RunConfig::echo`] rendered as config text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.echo() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_num::<f64>(key, v.trim())).collect()
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("{v} is not finite")))
    }
}

/// Parses config text. Relative data paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut raw: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", i + 1), "expected `key = value`"))?;
        let key = k.trim().to_string();
        if raw.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
            return Err(Error::config(key, "given more than once"));
        }
    }

    let mut cfg = RunConfig::defaults(base_dir);
    let mut prior_params = None;
    let mut prior_mean = None;
    let mut usd_std = None;
    let mut eq_mode = None;
    let mut eq_value = None;
    for (key, (_, value)) in &raw {
        let k = key.as_str();
        let v = value.as_str();
        match k {
            "currencies" => {
                let codes: Vec<String> = v.split(',').map(|c| c.trim().to_ascii_uppercase()).collect();
                if codes.iter().any(|c| c.is_empty()) {
                    return Err(Error::config(k, "empty currency code"));
                }
                cfg.currencies = Some(codes);
            }
            "start" => cfg.start = Some(v.parse().map_err(|_| Error::config(k, format!("bad quarter `{v}`")))?),
            "end" => cfg.end = Some(v.parse().map_err(|_| Error::config(k, format!("bad quarter `{v}`")))?),
            "n_particles" => cfg.n_particles = parse_num(k, v)?,
            "gamma" => cfg.model.gamma = finite(k, parse_num(k, v)?)?,
            "floor" => cfg.model.floor = finite(k, parse_num(k, v)?)?,
            "alpha_min" => cfg.model.alpha_min = finite(k, parse_num(k, v)?)?,
            "distribution" => {
                cfg.model.obs_dist = v.parse().map_err(|_| Error::config(k, format!("unknown distribution `{v}`")))?
            }
            "maturity_years" => {
                let years: f64 = parse_num(k, v)?;
                cfg.maturity = Maturity::from_years(years).map_err(|e| Error::config(k, e.to_string()))?;
            }
            "seed" => cfg.seed = parse_num(k, v)?,
            "prior.params" => prior_params = Some(parse_list(k, v)?),
            "prior.mean" => {
                prior_mean = Some(match v.to_ascii_lowercase().as_str() {
                    "cofer" => PriorMean::Cofer,
                    "reported" => PriorMean::Reported,
                    _ => PriorMean::Explicit(parse_list(k, v)?),
                })
            }
            "prior.usd_std" => usd_std = Some(finite(k, parse_num(k, v)?)?),
            "prior.width" => cfg.prior_width = finite(k, parse_num(k, v)?)?,
            "equity_share.mode" => eq_mode = Some(v.to_ascii_lowercase()),
            "equity_share.value" => eq_value = Some(finite(k, parse_num(k, v)?)?),
            "equity_share.half_window" => cfg.equity_half_window = parse_num(k, v)?,
            "sigma_obs.mean" => cfg.sigma_obs_mean = Some(finite(k, parse_num(k, v)?)?),
            "baseline.window" => cfg.baseline_window = Some(parse_num(k, v)?),
            "baseline.smoothing" => cfg.baseline_smoothing = finite(k, parse_num(k, v)?)?,
            "quantiles" => cfg.quantiles = parse_list(k, v)?,
            _ if k.starts_with("fallback_return.") => {
                let code = k["fallback_return.".len()..].to_ascii_uppercase();
                let r: f64 = finite(k, parse_num(k, v)?)?;
                if r <= -1.0 {
                    return Err(Error::config(k, format!("{r} must exceed -1")));
                }
                cfg.fallback_return.insert(code, r);
            }
            _ if k.starts_with("data.") => {
                let p = base_dir.join(v);
                match &k["data.".len()..] {
                    "reserves" => cfg.data.reserves = p,
                    "rates" => cfg.data.rates = p,
                    "yields" => cfg.data.yields = p,
                    "equity" => cfg.data.equity = p,
                    "sdr" => cfg.data.sdr = p,
                    "cofer" => cfg.data.cofer = p,
                    "reported" => {
                        cfg.data.reported = p;
                        cfg.reported_required = true;
                    }
                    _ => return Err(Error::config(k, "unknown data file")),
                }
            }
            _ => return Err(Error::config(k, "unknown key")),
        }
    }

    cfg.prior = match (prior_params, prior_mean) {
        (Some(_), Some(_)) => return Err(Error::config("prior.params", "conflicts with prior.mean")),
        (Some(p), None) => {
            if usd_std.is_some() {
                return Err(Error::config("prior.usd_std", "only applies with prior.mean"));
            }
            PriorSpec::Params(p)
        }
        (None, Some(mean)) => PriorSpec::Mean {
            usd_std: usd_std.unwrap_or(match mean {
                PriorMean::Cofer => DEFAULT_PRIOR_USD_STD,
                _ => DEFAULT_PINNED_USD_STD,
            }),
            mean,
        },
        (None, None) => PriorSpec::Mean { mean: PriorMean::Cofer, usd_std: usd_std.unwrap_or(DEFAULT_PRIOR_USD_STD) },
    };
    cfg.equity_share = match (eq_mode.as_deref(), eq_value) {
        (None | Some("estimated"), None) => EquityShareMode::Estimated,
        (None | Some("estimated"), Some(_)) => {
            return Err(Error::config("equity_share.value", "only applies with equity_share.mode = fixed"))
        }
        (Some("fixed"), Some(x)) => EquityShareMode::Fixed(x),
        (Some("fixed"), None) => return Err(Error::config("equity_share.value", "required when the mode is fixed")),
        (Some(m), _) => return Err(Error::config("equity_share.mode", format!("`{m}` is not estimated or fixed"))),
    };
    validate(&cfg)?;
    Ok(cfg)
}

/// Range checks that do not need the data.
pub fn validate(cfg: &RunConfig) -> Result<()> {
    if let Some(c) = &cfg.currencies {
        if !c.iter().any(|c| c == "USD") {
            return Err(Error::config("currencies", "must include USD"));
        }
        let n = c.len();
        let mut sorted = c.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::config("currencies", "duplicate currency code"));
        }
        if let Some(bad) = cfg.fallback_return.keys().find(|k| !c.contains(k)) {
            return Err(Error::config(format!("fallback_return.{bad}"), "currency not in `currencies`"));
        }
        cfg.model.validate(n)?;
        let len_check = |field: &str, v: &[f64]| -> Result<()> {
            if v.len() != n {
                return Err(Error::config(field, format!("{} values for {n} currencies", v.len())));
            }
            Ok(())
        };
        match &cfg.prior {
            PriorSpec::Params(p) => len_check("prior.params", p)?,
            PriorSpec::Mean { mean: PriorMean::Explicit(m), .. } => len_check("prior.mean", m)?,
            _ => {}
        }
    } else {
        // Floor bound depends on the currency count; check what does not.
        let mut m = cfg.model.clone();
        m.floor = 0.0;
        m.validate(1)?;
        if !(cfg.model.floor >= 0.0) {
            return Err(Error::config("floor", "must be nonnegative"));
        }
        if matches!(cfg.prior, PriorSpec::Params(_) | PriorSpec::Mean { mean: PriorMean::Explicit(_), .. }) {
            return Err(Error::config("currencies", "required when the prior lists values per currency"));
        }
    }
    if let (Some(s), Some(e)) = (cfg.start, cfg.end) {
        if s.offset_to(e) < 0 {
            return Err(Error::config("end", format!("{e} precedes start {s}")));
        }
    }
    if cfg.n_particles == 0 || cfg.n_particles > MAX_PARTICLES {
        return Err(Error::config("n_particles", format!("{} outside [1, {MAX_PARTICLES}]", cfg.n_particles)));
    }
    match &cfg.prior {
        PriorSpec::Params(p) => {
            if p.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
                return Err(Error::config("prior.params", "every parameter must be positive and finite"));
            }
        }
        PriorSpec::Mean { mean, usd_std } => {
            if let PriorMean::Explicit(m) = mean {
                if m.iter().any(|a| !(*a > 0.0)) || (m.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                    return Err(Error::config("prior.mean", "shares must be positive and sum to 1"));
                }
            }
            if !(*usd_std > 0.0 && *usd_std < 0.5) {
                return Err(Error::config("prior.usd_std", format!("{usd_std} outside (0, 0.5)")));
            }
        }
    }
    if !(cfg.prior_width > 0.0) {
        return Err(Error::config("prior.width", format!("{} must be positive", cfg.prior_width)));
    }
    if let EquityShareMode::Fixed(x) = cfg.equity_share {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::config("equity_share.value", format!("{x} outside [0, 1]")));
        }
    }
    if cfg.equity_half_window < 1 {
        return Err(Error::config("equity_share.half_window", "must be at least 1"));
    }
    if let Some(s) = cfg.sigma_obs_mean {
        if !(s > 0.0) {
            return Err(Error::config("sigma_obs.mean", format!("{s} must be positive")));
        }
    }
    if cfg.baseline_window == Some(0) {
        return Err(Error::config("baseline.window", "must be at least 1"));
    }
    if !(cfg.baseline_smoothing >= 0.0) {
        return Err(Error::config("baseline.smoothing", "must be nonnegative"));
    }
    if cfg.quantiles.is_empty() || cfg.quantiles.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::config("quantiles", "need probabilities in [0, 1]"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_model::{ObsDistribution, DEFAULT_GAMMA};

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Path::new("/data"))
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("not a config error: {other}"),
        }
    }

    #[test]
    fn empty_config_gives_defaults() {
        let c = parse("# nothing set\n\n").unwrap();
        assert_eq!(c.model.gamma, DEFAULT_GAMMA);
        assert_eq!(c.model.gamma, 0.015 * 0.015);
        assert_eq!(c.n_particles, 10_000);
        assert_eq!(c.model.floor, 0.01);
        assert_eq!(c.model.obs_dist, ObsDistribution::Laplace);
        assert_eq!(c.maturity.years(), 7.0);
        assert_eq!(c.data.reserves, Path::new("/data/reserves.csv"));
        assert_eq!(c.quantiles, DEFAULT_QUANTILES.to_vec());
        assert!(!c.reported_required);
    }

    #[test]
    fn full_config() {
        let c = parse(
            "currencies = usd, EUR, JPY\nstart = 2005Q1\nend = 2022Q3 # trailing comment\n\
             n_particles = 500\ndistribution = normal\nmaturity_years = 2\nseed = 42\n\
             prior.mean = 0.6, 0.3, 0.1\nequity_share.mode = fixed\nequity_share.value = 0.1\n\
             fallback_return.jpy = 0.001\ndata.reserves = sub/w.csv\n",
        )
        .unwrap();
        assert_eq!(c.currencies.as_deref().unwrap(), ["USD", "EUR", "JPY"]);
        assert_eq!(c.start.unwrap().to_string(), "2005Q1");
        assert_eq!(c.model.obs_dist, ObsDistribution::Normal);
        assert_eq!(
            c.prior,
            PriorSpec::Mean { mean: PriorMean::Explicit(vec![0.6, 0.3, 0.1]), usd_std: DEFAULT_PINNED_USD_STD }
        );
        assert_eq!(c.equity_share, EquityShareMode::Fixed(0.1));
        assert_eq!(c.fallback_return["JPY"], 0.001);
        assert_eq!(c.data.reserves, Path::new("/data/sub/w.csv"));
    }

    #[test]
    fn out_of_range_names_field() {
        assert_eq!(field_of(parse("gamma = 0.3").unwrap_err()), "gamma");
        assert_eq!(field_of(parse("n_particles = 0").unwrap_err()), "n_particles");
        assert_eq!(field_of(parse("maturity_years = 0.1").unwrap_err()), "maturity_years");
        assert_eq!(field_of(parse("currencies = EUR,JPY").unwrap_err()), "currencies");
        assert_eq!(field_of(parse("currencies = USD,EUR,JPY\nfloor = 0.4").unwrap_err()), "floor");
        assert_eq!(field_of(parse("equity_share.mode = fixed").unwrap_err()), "equity_share.value");
        assert_eq!(field_of(parse("bogus = 1").unwrap_err()), "bogus");
        assert_eq!(field_of(parse("seed = 1\nseed = 2").unwrap_err()), "seed");
        assert_eq!(field_of(parse("currencies = USD,EUR\nprior.params = 1,2,3").unwrap_err()), "prior.params");
        assert_eq!(field_of(parse("quantiles = 0.5, 1.5").unwrap_err()), "quantiles");
        assert_eq!(parse("gamma = 0.3").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn echo_round_trips() {
        let c = parse(
            "currencies = USD,EUR\nprior.params = 3.5,1.25\nsigma_obs.mean = 0.004\nbaseline.window = 6\n\
             fallback_return.EUR = -0.0005\nquantiles = 0.05,0.5,0.95\ndata.reported = r.csv",
        )
        .unwrap();
        let again = parse_config(&c.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(again, c);
    }
}
