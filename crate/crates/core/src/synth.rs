//! Synthetic country datasets drawn from the model, with the true share path kept.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::accounting::{
    build_return_panel, sdr_quarterly_vol, scale_obs_vol, CurrencySet, Maturity, MarketPanel, Quarter,
};
use crate::equity_share::{CoferShares, EquityShareSeries};
use crate::error::{Error, Result};
use crate::io::load::{quarter_start, CoferResidual, CountryDataset};
use crate::io::write::write_text;
use crate::io::{write_dataset, EquityShareMode, PriorMean, PriorSpec, RunConfig};
use crate::particle_filter::{simulate_panel, substream, NoiseSpec, ReportedShare, TrueStart};
use crate::pipeline::PRIOR_MEAN_FLOOR;
use crate::simplex::SimplexShares;
use crate::state_model::{dirichlet_from_mean_usd_std, DirichletParams, ModelParams, ObsDistribution};

pub const SYNTH_MATURITIES: [f64; 4] = [2.0, 5.0, 7.0, 10.0];

// Stream ids for the independent parts of a synthetic draw.
const MARKET: u64 = 101;
const SDR: u64 = 102;
const COFER: u64 = 103;
const TRUTH: u64 = 104;

/// Shape of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub currencies: Vec<String>,
    /// First filtered quarter.
    pub start: Quarter,
    pub n_quarters: usize,
    pub seed: u64,
    pub noise: ObsDistribution,
    /// Mean observation scale.
    pub sigma_mean: f64,
    pub equity_share: f64,
    pub prior_usd_std: f64,
    pub model: ModelParams,
    /// Reported shares every this many quarters (plus the prior quarter).
    pub report_every: usize,
    /// World share of currencies outside the set.
    pub other_share: f64,
    pub maturity_years: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            currencies: ["USD", "EUR", "JPY", "GBP", "CAD", "AUD"].map(String::from).to_vec(),
            start: Quarter::new(2004, 1).expect("valid quarter"),
            n_quarters: 75,
            seed: 0,
            noise: ObsDistribution::Laplace,
            sigma_mean: 0.004,
            equity_share: 0.1,
            prior_usd_std: 0.065,
            model: ModelParams::default(),
            report_every: 4,
            other_share: 0.05,
            maturity_years: 7.0,
        }
    }
}

/// A generated dataset, its hidden truth and a config that reproduces the generating model.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: CountryDataset,
    /// True shares for `start.prev() ..= end`.
    pub truth: Vec<SimplexShares>,
    pub prior: DirichletParams,
    pub noise_scale: Vec<f64>,
    pub config: RunConfig,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws a market, world shares and reserves consistent with the model.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    if spec.n_quarters < 2 {
        return Err(Error::config("quarters", "need at least two quarters"));
    }
    if !(0.0..1.0).contains(&spec.other_share) {
        return Err(Error::config("other_share", "must be in [0, 1)"));
    }
    let currencies = CurrencySet::new(&spec.currencies)?;
    let n = currencies.len();
    let usd = currencies.usd_index();
    let end = {
        let mut q = spec.start;
        for _ in 1..spec.n_quarters {
            q = q.next();
        }
        q
    };
    let levels = Quarter::range(spec.start.prev(), end);
    let t_len = levels.len();

    let mut rng = substream(spec.seed, MARKET, 0, 0);
    let mut fx = vec![vec![1.0; n]; t_len];
    let mut equity = vec![vec![100.0; n]; t_len];
    let base_yield: Vec<f64> = (0..n).map(|_| rng.random_range(0.005..0.05)).collect();
    let mut short = vec![base_yield.clone()];
    for (c, v) in fx[0].iter_mut().enumerate() {
        if c != usd {
            *v = rng.random_range(0.5..2.0);
        }
    }
    for t in 1..t_len {
        let mut s = vec![0.0; n];
        for c in 0..n {
            fx[t][c] = if c == usd { 1.0 } else { fx[t - 1][c] * (0.04 * normal(&mut rng)).exp() };
            equity[t][c] = equity[t - 1][c] * (0.015 + 0.08 * normal(&mut rng)).exp();
            let prev = short[t - 1][c];
            s[c] = (prev + 0.25 * (base_yield[c] - prev) + 0.003 * normal(&mut rng)).max(-0.005);
        }
        short.push(s);
    }
    let mut yields = BTreeMap::new();
    for m in SYNTH_MATURITIES {
        let per: Vec<Option<Vec<f64>>> =
            (0..n).map(|c| Some((0..t_len).map(|t| short[t][c] + 0.002 * m.sqrt()).collect())).collect();
        yields.insert(Maturity::from_years(m)?, per);
    }

    // Weekday SDR fixings with a slowly cycling volatility.
    let mut rng = substream(spec.seed, SDR, 0, 0);
    let mut daily_sdr = Vec::new();
    let mut level = 1.45;
    for (t, q) in levels.iter().enumerate() {
        let vol = 0.003 * (1.0 + 0.5 * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin()) + 0.0005;
        let mut d = quarter_start(*q);
        let stop = quarter_start(q.next());
        while d < stop {
            if d.weekday().number_from_monday() <= 5 {
                level *= 1.0 + vol * normal(&mut rng);
                daily_sdr.push((d, level));
            }
            d = d.succ_opt().expect("date in range");
        }
    }

    // World shares: a drifting composition, with a residual outside the set.
    let mut rng = substream(spec.seed, COFER, 0, 0);
    let mut log_w: Vec<f64> = (0..n).map(|c| if c == usd { 1.5 } else { rng.random_range(-1.5..0.5) }).collect();
    let cofer_q = Quarter::range(spec.start.prev(), end.prev());
    let mut cofer_shares = Vec::with_capacity(cofer_q.len());
    let mut residual = Vec::with_capacity(cofer_q.len());
    for q in &cofer_q {
        for w in log_w.iter_mut() {
            *w += 0.02 * normal(&mut rng);
        }
        let raw: Vec<f64> = log_w.iter().map(|w| w.exp()).collect();
        let s = SimplexShares::normalize(&raw)?;
        let kept: Vec<f64> = s.as_slice().iter().map(|v| v * (1.0 - spec.other_share)).collect();
        let kept_sum: f64 = kept.iter().sum();
        let (shares, factor) = if spec.other_share == 0.0 {
            (s.clone(), 1.0)
        } else {
            (SimplexShares::normalize(&kept)?, 1.0 / kept_sum)
        };
        cofer_shares.push(shares);
        residual.push(CoferResidual { quarter: *q, kept, dropped: spec.other_share, factor });
    }
    let cofer = CoferShares::new(cofer_q, cofer_shares)?;

    let prior_mean = {
        let s = cofer.shares()[0].as_slice();
        SimplexShares::normalize(&s.iter().map(|v| v.max(PRIOR_MEAN_FLOOR)).collect::<Vec<_>>())?
    };
    let prior = dirichlet_from_mean_usd_std(&prior_mean, usd, spec.prior_usd_std)?;

    let market = MarketPanel {
        quarters: levels.clone(),
        currencies: currencies.clone(),
        fx,
        yields,
        equity,
        daily_sdr,
    };
    let maturity = Maturity::from_years(spec.maturity_years)?;
    let returns = build_return_panel(&market, maturity, &[])?;
    let obs_quarters = levels[1..].to_vec();
    let vol = sdr_quarterly_vol(&market.daily_sdr, &obs_quarters)?;
    let noise_scale = scale_obs_vol(&vol, &[0.0], Some(spec.sigma_mean))?;
    let eq = EquityShareSeries::constant(obs_quarters.clone(), spec.equity_share)?;

    let mut rng = substream(spec.seed, TRUTH, 0, 0);
    let purchase_rates: Vec<f64> = (0..spec.n_quarters).map(|_| rng.random_range(-0.01..0.03)).collect();
    let sim = simulate_panel(
        &TrueStart::Prior(prior.clone()),
        usd,
        &spec.model,
        &returns,
        &eq,
        &NoiseSpec { dist: spec.noise, scale: noise_scale.clone() },
        &purchase_rates,
        3000.0,
        &mut rng,
    )?;

    let mut reported = Vec::new();
    if spec.report_every > 0 {
        for (t, q) in levels.iter().enumerate() {
            if t % spec.report_every == 0 {
                for c in 0..n {
                    reported.push(ReportedShare { quarter: *q, currency: c, share: sim.true_path[t].get(c) });
                }
            }
        }
    }

    let mut config = RunConfig::defaults(Path::new("."));
    config.currencies = Some(currencies.codes().to_vec());
    config.start = Some(spec.start);
    config.end = Some(end);
    config.seed = spec.seed;
    config.model = ModelParams { obs_dist: spec.noise, ..spec.model.clone() };
    config.maturity = maturity;
    config.prior = PriorSpec::Mean { mean: PriorMean::Cofer, usd_std: spec.prior_usd_std };
    config.equity_share = EquityShareMode::Fixed(spec.equity_share);
    config.sigma_obs_mean = Some(spec.sigma_mean);

    let dataset = CountryDataset { currencies, reserves: sim.reserves, market, cofer, cofer_residual: residual, reported };
    Ok(SynthOutput { dataset, truth: sim.true_path, prior, noise_scale, config })
}

/// Writes the data files, `truth.csv` and `reservemix.cfg` into `dir`; returns the config path.
pub fn write_synth(out: &SynthOutput, dir: &Path) -> Result<PathBuf> {
    write_dataset(&out.dataset, dir)?;
    let mut config = out.config.clone();
    config.data = crate::io::DataPaths::in_dir(Path::new("."));
    config.reported_required = !out.dataset.reported.is_empty();
    let text = relative_config_text(&config);
    let cfg_path = dir.join("reservemix.cfg");
    write_text(&cfg_path, &text)?;

    let codes = out.dataset.currencies.codes();
    let mut s = String::from("quarter,currency,share\n");
    for (q, shares) in out.dataset.reserves.quarters().iter().zip(&out.truth) {
        for (code, v) in codes.iter().zip(shares.as_slice()) {
            let _ = writeln!(s, "{q},{code},{v}");
        }
    }
    write_text(&dir.join("truth.csv"), &s)?;
    Ok(cfg_path)
}

fn relative_config_text(config: &RunConfig) -> String {
    let mut s = String::from("# synthetic dataset; truth.csv holds the simulated shares\n");
    for (k, v) in config.echo() {
        let v = if k.starts_with("data.") { v.trim_start_matches("./").to_string() } else { v };
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

/// Weekday dates of a quarter, for fixtures.
pub fn weekdays(q: Quarter) -> Vec<NaiveDate> {
    quarter_start(q)
        .iter_days()
        .take_while(|d| Quarter::of_date(*d) == q)
        .filter(|d| d.weekday().number_from_monday() <= 5)
        .collect()
}
