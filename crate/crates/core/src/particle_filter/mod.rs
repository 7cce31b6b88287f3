//! Sequential Monte Carlo over currency shares: predict with the Dirichlet
//! transition, reweight by the observation density, resample every quarter.
//!
//! Every random draw comes from a ChaCha stream keyed by `(seed, purpose,
//! quarter)` with the particle index as the stream id, so results do not
//! depend on how particles are scheduled across threads.

mod resample;
mod simulate;
mod summary;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::accounting::{CurrencySet, ObservationSeries, ReturnPanel};
use crate::equity_share::EquityShareSeries;
use crate::error::{Error, Result};
use crate::state_model::{
    dot, obs_loglik, observation_loadings, sample_dirichlet_into, transition_sample_into, DirichletParams,
    ModelParams,
};

pub use resample::{effective_sample_size, multinomial_resample, reweight};
pub use simulate::{simulate_panel, NoiseSpec, SimulatedPanel, TrueStart};
pub use summary::{
    calibration_curve, interval_probs, merge_probs, weighted_quantile, weighted_quantiles, CalibrationPoint,
    FilterSummary, ReportedShare, CALIBRATION_LEVELS, DEFAULT_QUANTILES,
};

/// Default particle count.
pub const DEFAULT_PARTICLES: usize = 10_000;

const STREAM_INIT: u64 = 1;
const STREAM_PREDICT: u64 = 2;
const STREAM_RESAMPLE: u64 = 3;

/// Independent random stream for one `(purpose, quarter, index)` cell of a run.
pub fn substream(seed: u64, purpose: u64, quarter: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.to_le_bytes());
    key[16..24].copy_from_slice(&quarter.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Settings for one filter run.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    pub params: ModelParams,
    pub seed: u64,
    /// Probabilities at which share quantiles are recorded.
    pub probs: Vec<f64>,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: DEFAULT_PARTICLES,
            params: ModelParams::default(),
            seed: 0,
            probs: DEFAULT_QUANTILES.to_vec(),
            threads: None,
        }
    }
}

/// Weighted particles, stored row-major: particle `i` is `shares[i*n .. (i+1)*n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    n_currencies: usize,
    shares: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(n_currencies: usize, shares: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if n_currencies == 0 || shares.len() != n_currencies * weights.len() {
            return Err(Error::invalid("ensemble", "share table does not match the weight count"));
        }
        if weights.len() < 2 {
            return Err(Error::invalid("ensemble", "need at least two particles"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::invalid("ensemble", format!("weights sum to {total}")));
        }
        Ok(Self { n_currencies, shares, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n_currencies(&self) -> usize {
        self.n_currencies
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.shares[i * self.n_currencies..(i + 1) * self.n_currencies]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Shares of currency `c` across all particles.
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.shares.iter().skip(c).step_by(self.n_currencies).copied().collect()
    }
}

/// `n` independent prior draws with uniform weights.
pub fn init_particles(prior: &DirichletParams, n: usize, seed: u64) -> Result<ParticleEnsemble> {
    if n < 2 {
        return Err(Error::invalid("n_particles", "need at least two particles"));
    }
    let k = prior.len();
    let mut shares = vec![0.0; n * k];
    shares.par_chunks_mut(k).enumerate().for_each(|(i, out)| {
        let mut rng = substream(seed, STREAM_INIT, 0, i as u64);
        sample_dirichlet_into(prior.as_slice(), &mut rng, out);
    });
    ParticleEnsemble::new(k, shares, vec![1.0 / n as f64; n])
}

/// Runs the filter over every observation quarter.
///
/// The state at row `t` of the summary holds the shares in force during the
/// quarter ending at `obs.quarters[t - 1]`: it is propagated from row `t - 1`
/// and weighted by that quarter's observation.
pub fn run_filter(
    config: &FilterConfig,
    prior: &DirichletParams,
    currencies: &CurrencySet,
    obs: &ObservationSeries,
    returns: &ReturnPanel,
    equity: &EquityShareSeries,
) -> Result<FilterSummary> {
    match config.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .map_err(|e| Error::config("threads", e.to_string()))?;
            pool.install(|| run_filter_inner(config, prior, currencies, obs, returns, equity))
        }
        None => run_filter_inner(config, prior, currencies, obs, returns, equity),
    }
}

fn run_filter_inner(
    config: &FilterConfig,
    prior: &DirichletParams,
    currencies: &CurrencySet,
    obs: &ObservationSeries,
    returns: &ReturnPanel,
    equity: &EquityShareSeries,
) -> Result<FilterSummary> {
    let nc = currencies.len();
    let n = config.n_particles;
    let usd = currencies.usd_index();
    config.params.validate(nc)?;
    if prior.len() != nc {
        return Err(Error::invalid("prior", "prior length differs from the currency count"));
    }
    if obs.is_empty() {
        return Err(Error::invalid("observations", "no observation quarters"));
    }
    if obs.quarters != returns.quarters || obs.quarters != equity.quarters {
        return Err(Error::invalid("observations", "observations, returns and equity share are not aligned"));
    }
    if returns.n_currencies() != nc {
        return Err(Error::invalid("returns", "return panel width differs from the currency count"));
    }
    if let Some(p) = config.probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::config("quantiles", format!("probability {p} outside [0, 1]")));
    }

    let mut ensemble = init_particles(prior, n, config.seed)?;
    let mut summary = FilterSummary {
        currencies: currencies.clone(),
        probs: config.probs.clone(),
        quarters: Vec::with_capacity(obs.len() + 1),
        quantiles: Vec::with_capacity(obs.len() + 1),
        median: Vec::with_capacity(obs.len() + 1),
        observed: Vec::with_capacity(obs.len() + 1),
        predicted_median: Vec::with_capacity(obs.len() + 1),
        sigma_obs: Vec::with_capacity(obs.len() + 1),
        ess: Vec::with_capacity(obs.len() + 1),
        alpha_clamped: Vec::with_capacity(obs.len() + 1),
    };
    let (quantiles, median) = summarize(&ensemble, &config.probs)?;
    summary.quarters.push(obs.quarters[0].prev());
    summary.quantiles.push(quantiles);
    summary.median.push(median);
    summary.observed.push(None);
    summary.predicted_median.push(None);
    summary.sigma_obs.push(None);
    summary.ess.push(None);
    summary.alpha_clamped.push(0);

    let mut proposed = vec![0.0; n * nc];
    let mut loglik = vec![0.0; n];
    let mut clamped = vec![false; n];
    for t in 0..obs.len() {
        let quarter = obs.quarters[t];
        let (y, sigma) = (obs.y[t], obs.sigma_obs[t]);
        if !y.is_finite() {
            return Err(Error::Data(format!("missing observation at {quarter}")));
        }
        let x_eq = equity.x[t];
        let loadings = observation_loadings(x_eq, returns.row(t));
        let step = (t + 1) as u64;
        let dist = config.params.obs_dist;
        let params = &config.params;
        let current = &ensemble.shares;

        proposed
            .par_chunks_mut(nc)
            .zip(loglik.par_iter_mut().zip(clamped.par_iter_mut()))
            .enumerate()
            .for_each_init(
                || vec![0.0; nc],
                |scratch, (i, (out, (ll, flag)))| {
                    let mut rng = substream(config.seed, STREAM_PREDICT, step, i as u64);
                    let from = &current[i * nc..(i + 1) * nc];
                    *flag = transition_sample_into(from, usd, params, &mut rng, scratch, out);
                    *ll = obs_loglik(y, dot(out, &loadings), sigma, dist);
                },
            );

        let weights = resample::normalize_log_weights(&ensemble.weights, &loglik).map_err(|e| Error::Numerical {
            quarter,
            reason: format!("particle weights collapsed ({e}); the model does not fit this observation"),
        })?;
        let weighted = ParticleEnsemble { n_currencies: nc, shares: std::mem::take(&mut proposed), weights };
        let (quantiles, median) = summarize(&weighted, &config.probs)?;
        summary.quarters.push(quarter);
        summary.predicted_median.push(Some(dot(&median, &loadings)));
        summary.quantiles.push(quantiles);
        summary.median.push(median);
        summary.observed.push(Some(y));
        summary.sigma_obs.push(Some(sigma));
        summary.ess.push(Some(effective_sample_size(&weighted.weights)));
        summary.alpha_clamped.push(clamped.iter().filter(|c| **c).count());

        let mut rng = substream(config.seed, STREAM_RESAMPLE, step, 0);
        let picks = multinomial_resample(&weighted.weights, n, &mut rng)?;
        let mut next = vec![0.0; n * nc];
        next.par_chunks_mut(nc).zip(picks.par_iter()).for_each(|(out, &k)| {
            out.copy_from_slice(weighted.particle(k));
        });
        proposed = weighted.shares;
        ensemble = ParticleEnsemble { n_currencies: nc, shares: next, weights: vec![1.0 / n as f64; n] };
    }
    Ok(summary)
}

/// Per-currency quantiles at `probs` and weighted medians.
fn summarize(ensemble: &ParticleEnsemble, probs: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let per_currency: Vec<(Vec<f64>, f64)> = (0..ensemble.n_currencies)
        .into_par_iter()
        .map(|c| {
            let column = ensemble.column(c);
            let mut all = probs.to_vec();
            all.push(0.5);
            let mut q = weighted_quantiles(&column, &ensemble.weights, &all)?;
            let median = q.pop().expect("median requested");
            Ok((q, median))
        })
        .collect::<Result<_>>()?;
    Ok(per_currency.into_iter().unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn substreams_differ_and_repeat() {
        let a = substream(7, STREAM_PREDICT, 3, 10).next_u64();
        assert_eq!(a, substream(7, STREAM_PREDICT, 3, 10).next_u64());
        assert_ne!(a, substream(7, STREAM_PREDICT, 3, 11).next_u64());
        assert_ne!(a, substream(7, STREAM_PREDICT, 4, 10).next_u64());
        assert_ne!(a, substream(8, STREAM_PREDICT, 3, 10).next_u64());
        assert_ne!(a, substream(7, STREAM_INIT, 3, 10).next_u64());
    }

    #[test]
    fn two_particle_init() {
        let prior = DirichletParams::new(vec![2.0, 3.0]).unwrap();
        let e = init_particles(&prior, 2, 1).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.weights(), &[0.5, 0.5]);
        assert!(init_particles(&prior, 1, 1).is_err());
    }

    #[test]
    fn concentrated_prior_component_dominates() {
        let prior = DirichletParams::new(vec![1e5, 1.0, 1.0]).unwrap();
        let e = init_particles(&prior, 5_000, 4).unwrap();
        let mean = e.column(0).iter().sum::<f64>() / 5_000.0;
        assert!(mean >= 0.99);
    }

    #[test]
    fn ensemble_validation() {
        assert!(ParticleEnsemble::new(2, vec![0.5; 4], vec![0.5, 0.5]).is_ok());
        assert!(ParticleEnsemble::new(2, vec![0.5; 4], vec![0.7, 0.5]).is_err());
        assert!(ParticleEnsemble::new(2, vec![0.5; 3], vec![0.5, 0.5]).is_err());
    }
}
