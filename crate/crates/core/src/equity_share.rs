//! Time-varying equity share of the portfolio, fitted by rolling weighted
//! least squares with world-average currency shares as stand-in weights.

use crate::accounting::{ObservationSeries, Quarter, ReturnPanel};
use crate::error::{Error, Result};
use crate::simplex::SimplexShares;

/// Default half-width of the rolling window (a 20-quarter span).
pub const DEFAULT_HALF_WINDOW: usize = 10;

/// World-average currency shares per quarter over the model's currency set.
#[derive(Debug, Clone, PartialEq)]
pub struct CoferShares {
    quarters: Vec<Quarter>,
    shares: Vec<SimplexShares>,
}

impl CoferShares {
    pub fn new(quarters: Vec<Quarter>, shares: Vec<SimplexShares>) -> Result<Self> {
        if quarters.len() != shares.len() || quarters.is_empty() {
            return Err(Error::invalid("cofer", "need one share vector per quarter"));
        }
        crate::accounting::check_contiguous(&quarters)?;
        Ok(Self { quarters, shares })
    }

    pub fn quarters(&self) -> &[Quarter] {
        &self.quarters
    }

    pub fn shares(&self) -> &[SimplexShares] {
        &self.shares
    }

    pub fn get(&self, quarter: Quarter) -> Option<&SimplexShares> {
        let offset = self.quarters[0].offset_to(quarter);
        usize::try_from(offset).ok().and_then(|i| self.shares.get(i))
    }
}

/// Fitted equity share per observation quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct EquityShareSeries {
    pub quarters: Vec<Quarter>,
    pub x: Vec<f64>,
    /// Set where equity and bond predictions coincide over the whole window.
    pub degenerate: Vec<bool>,
}

impl EquityShareSeries {
    /// The same share in every quarter.
    pub fn constant(quarters: Vec<Quarter>, x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::config("equity_share.value", format!("{x} outside [0, 1]")));
        }
        let n = quarters.len();
        Ok(Self { quarters, x: vec![x; n], degenerate: vec![false; n] })
    }
}

/// Currency-fluctuation plus return component: `sum_i b_i (1 + r_i) de_i + sum_i b_i r_i`.
pub fn predicted_component(beta: &[f64], returns: &[f64], fx_growth: &[f64]) -> f64 {
    let fluctuation: f64 = beta.iter().zip(returns).zip(fx_growth).map(|((b, r), d)| b * (1.0 + r) * d).sum();
    let carry: f64 = beta.iter().zip(returns).map(|(b, r)| b * r).sum();
    fluctuation + carry
}

/// Fits `x_t` in `[0, 1]` minimizing the `1/sigma^2`-weighted squared gap between
/// `y` and the equity/bond mix of predictions over a window of `half_window`
/// quarters either side of `t`, truncated at the series ends.
///
/// The objective is a scalar quadratic, so each window is solved in closed form
/// as a weighted regression of `y - P_bd` on `P_eq - P_bd`, then clamped. The
/// weights for quarter `t` are the world shares at the start of that quarter.
pub fn estimate_equity_share(
    obs: &ObservationSeries,
    cofer: &CoferShares,
    returns: &ReturnPanel,
    half_window: usize,
) -> Result<EquityShareSeries> {
    if half_window < 1 {
        return Err(Error::config("equity_share.half_window", "must be at least 1"));
    }
    if obs.quarters != returns.quarters {
        return Err(Error::invalid("equity_share", "observations and returns are not aligned"));
    }
    let n = obs.len();
    let mut target = Vec::with_capacity(n);
    let mut spread = Vec::with_capacity(n);
    for (t, q) in obs.quarters.iter().enumerate() {
        let beta = cofer
            .get(q.prev())
            .ok_or_else(|| Error::Data(format!("no world currency shares for {}", q.prev())))?;
        if beta.len() != returns.n_currencies() {
            return Err(Error::invalid("cofer", "currency count differs from returns"));
        }
        let row = returns.row(t);
        let p_eq = predicted_component(beta.as_slice(), row.equity, row.fx_growth);
        let p_bd = predicted_component(beta.as_slice(), row.bond, row.fx_growth);
        target.push(obs.y[t] - p_bd);
        spread.push(p_eq - p_bd);
    }

    let mut x = Vec::with_capacity(n);
    let mut degenerate = Vec::with_capacity(n);
    for t in 0..n {
        let lo = t.saturating_sub(half_window);
        let hi = (t + half_window).min(n - 1);
        let (mut sxy, mut sxx, mut max_abs) = (0.0, 0.0, 0.0f64);
        for s in lo..=hi {
            let w = 1.0 / (obs.sigma_obs[s] * obs.sigma_obs[s]);
            sxy += w * spread[s] * target[s];
            sxx += w * spread[s] * spread[s];
            max_abs = max_abs.max(spread[s].abs());
        }
        if max_abs == 0.0 || !(sxx > 0.0) {
            x.push(0.0);
            degenerate.push(true);
        } else {
            x.push((sxy / sxx).clamp(0.0, 1.0));
            degenerate.push(false);
        }
    }
    Ok(EquityShareSeries { quarters: obs.quarters.clone(), x, degenerate })
}
