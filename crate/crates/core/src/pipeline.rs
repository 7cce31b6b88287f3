//! End-to-end runs: dataset plus config to filter summaries and baselines.

use rayon::prelude::*;

use crate::accounting::{build_observations, build_return_panel, CurrencySet, Maturity, ObservationSeries, ReturnPanel};
use crate::equity_share::{estimate_equity_share, EquityShareSeries};
use crate::error::{Error, Result};
use crate::io::{CountryDataset, EquityShareMode, PriorMean, PriorSpec, RunConfig};
use crate::particle_filter::{
    calibration_curve, interval_probs, merge_probs, run_filter, CalibrationPoint, FilterConfig, FilterSummary,
    CALIBRATION_LEVELS,
};
use crate::simplex::SimplexShares;
use crate::simplex_lsq::{rolling_optimize, BaselineSeries};
use crate::state_model::{dirichlet_from_mean_usd_std, DirichletParams, ObsDistribution};

/// Smallest mean share given to any currency in a prior built from observed shares.
pub const PRIOR_MEAN_FLOOR: f64 = 0.01;

/// Model inputs derived from a dataset under one configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub currencies: CurrencySet,
    pub obs: ObservationSeries,
    pub returns: ReturnPanel,
    pub equity: EquityShareSeries,
    pub prior: DirichletParams,
}

fn floored_mean(shares: &[f64]) -> Result<SimplexShares> {
    let floored: Vec<f64> = shares.iter().map(|s| s.max(PRIOR_MEAN_FLOOR)).collect();
    SimplexShares::normalize(&floored)
}

/// The Dirichlet prior for the quarter before the first observation.
pub fn resolve_prior(config: &RunConfig, dataset: &CountryDataset) -> Result<DirichletParams> {
    let usd = dataset.currencies.usd_index();
    let n = dataset.currencies.len();
    let base = match &config.prior {
        PriorSpec::Params(p) => {
            if p.len() != n {
                return Err(Error::config("prior.params", format!("{} values for {n} currencies", p.len())));
            }
            DirichletParams::new(p.clone()).map_err(|e| Error::config("prior.params", e.to_string()))?
        }
        PriorSpec::Mean { mean, usd_std } => {
            let prior_q = dataset.start().prev();
            let m = match mean {
                PriorMean::Explicit(v) => {
                    if v.len() != n {
                        return Err(Error::config("prior.mean", format!("{} values for {n} currencies", v.len())));
                    }
                    SimplexShares::normalize(v)?
                }
                PriorMean::Cofer => {
                    let s = dataset
                        .cofer
                        .get(prior_q)
                        .ok_or_else(|| Error::Data(format!("no world currency shares for {prior_q}")))?;
                    floored_mean(s.as_slice())?
                }
                PriorMean::Reported => {
                    let mut v = vec![None; n];
                    for r in dataset.reported.iter().filter(|r| r.quarter == prior_q) {
                        v[r.currency] = Some(r.share);
                    }
                    let v: Vec<f64> = v
                        .iter()
                        .enumerate()
                        .map(|(c, s)| {
                            s.ok_or_else(|| {
                                Error::Data(format!(
                                    "no self-reported {} share for {prior_q}",
                                    dataset.currencies.codes()[c]
                                ))
                            })
                        })
                        .collect::<Result<_>>()?;
                    floored_mean(&v)?
                }
            };
            dirichlet_from_mean_usd_std(&m, usd, *usd_std).map_err(|e| Error::config("prior.usd_std", e.to_string()))?
        }
    };
    if config.prior_width == 1.0 {
        Ok(base)
    } else {
        base.widened(config.prior_width).map_err(|e| Error::config("prior.width", e.to_string()))
    }
}

/// Derives observations, returns, the equity share and the prior.
pub fn prepare(config: &RunConfig, dataset: &CountryDataset) -> Result<Prepared> {
    let currencies = dataset.currencies.clone();
    let fallback: Vec<Option<f64>> =
        currencies.codes().iter().map(|c| config.fallback_return.get(c).copied()).collect();
    let returns = build_return_panel(&dataset.market, config.maturity, &fallback)?;
    let obs = build_observations(&dataset.reserves, &dataset.market.daily_sdr, config.sigma_obs_mean)?;
    let equity = match config.equity_share {
        EquityShareMode::Fixed(x) => EquityShareSeries::constant(obs.quarters.clone(), x)?,
        EquityShareMode::Estimated => {
            estimate_equity_share(&obs, &dataset.cofer, &returns, config.equity_half_window)?
        }
    };
    config.model.validate(currencies.len())?;
    let prior = resolve_prior(config, dataset)?;
    Ok(Prepared { currencies, obs, returns, equity, prior })
}

pub fn filter_config(config: &RunConfig, probs: Vec<f64>) -> FilterConfig {
    FilterConfig {
        n_particles: config.n_particles,
        params: config.model.clone(),
        seed: config.seed,
        probs,
        threads: None,
    }
}

fn run(config: &RunConfig, prepared: &Prepared, probs: Vec<f64>) -> Result<FilterSummary> {
    run_filter(
        &filter_config(config, probs),
        &prepared.prior,
        &prepared.currencies,
        &prepared.obs,
        &prepared.returns,
        &prepared.equity,
    )
}

/// Filters the whole dataset at the configured quantiles.
pub fn estimate(config: &RunConfig, dataset: &CountryDataset) -> Result<(Prepared, FilterSummary)> {
    let prepared = prepare(config, dataset)?;
    let summary = run(config, &prepared, config.quantiles.clone())?;
    Ok((prepared, summary))
}

/// Coverage of central intervals against self-reported shares.
pub fn calibrate(config: &RunConfig, dataset: &CountryDataset) -> Result<(FilterSummary, Vec<CalibrationPoint>)> {
    if dataset.reported.is_empty() {
        return Err(Error::Data("no self-reported shares for the configured currencies".into()));
    }
    let prepared = prepare(config, dataset)?;
    let probs = merge_probs(&config.quantiles, &interval_probs(&CALIBRATION_LEVELS));
    let summary = run(config, &prepared, probs)?;
    let curve = calibration_curve(&summary, &dataset.reported, &CALIBRATION_LEVELS)?;
    Ok((summary, curve))
}

/// One sensitivity axis and the values to visit.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Maturity(Vec<f64>),
    PriorWidth(Vec<f64>),
    Distribution(Vec<ObsDistribution>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Maturity(_) => "maturity",
            SweepAxis::PriorWidth(_) => "prior_width",
            SweepAxis::Distribution(_) => "distribution",
        }
    }

    /// Configs for every point, labelled by the swept value.
    pub fn points(&self, base: &RunConfig) -> Result<Vec<(String, RunConfig)>> {
        match self {
            SweepAxis::Maturity(v) => v
                .iter()
                .map(|m| {
                    let maturity = Maturity::from_years(*m).map_err(|e| Error::config("maturity_years", e.to_string()))?;
                    Ok((maturity.to_string(), RunConfig { maturity, ..base.clone() }))
                })
                .collect(),
            SweepAxis::PriorWidth(v) => v
                .iter()
                .map(|w| {
                    if !(*w > 0.0) {
                        return Err(Error::config("prior.width", format!("{w} must be positive")));
                    }
                    Ok((w.to_string(), RunConfig { prior_width: *w, ..base.clone() }))
                })
                .collect(),
            SweepAxis::Distribution(v) => Ok(v
                .iter()
                .map(|d| {
                    let mut c = base.clone();
                    c.model.obs_dist = *d;
                    (d.to_string(), c)
                })
                .collect()),
        }
    }
}

/// Runs every sweep point with the base seed. Points run concurrently.
pub fn sweep(base: &RunConfig, dataset: &CountryDataset, axis: &SweepAxis) -> Result<Vec<(String, FilterSummary)>> {
    let points = axis.points(base)?;
    if points.is_empty() {
        return Err(Error::config("sweep", "no sweep values"));
    }
    points
        .into_par_iter()
        .map(|(label, cfg)| estimate(&cfg, dataset).map(|(_, s)| (label, s)))
        .collect()
}

/// Rolling least-squares shares over the configured window.
pub fn baseline(config: &RunConfig, dataset: &CountryDataset) -> Result<BaselineSeries> {
    let prepared = prepare(config, dataset)?;
    let window = config.baseline_window.unwrap_or(prepared.currencies.len());
    rolling_optimize(&prepared.obs, &prepared.returns, Some(&prepared.equity), window, config.baseline_smoothing)
}
