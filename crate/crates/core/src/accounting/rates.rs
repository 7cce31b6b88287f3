use crate::error::{Error, Result};
use crate::simplex::SimplexShares;

use super::{Maturity, MarketPanel, ReservePanel, ReturnPanel};

/// Period-over-period growth `(s_t - s_{t-1}) / s_{t-1}`; one element shorter than the input.
pub fn growth_rate(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::invalid("series", "need at least two levels"));
    }
    if let Some(v) = series.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("series", format!("level {v} is not positive")));
    }
    Ok(series.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect())
}

/// Reserve growth net of the purchase rate: `(W_t - W_{t-1} - C_t) / W_{t-1}`.
///
/// `C_t` is the flow of net purchases during quarter `t`, so the purchase rate
/// is `C_t / W_{t-1}`. The result has one entry per quarter after the first.
pub fn nonpurchase_rate(panel: &ReservePanel) -> Result<Vec<f64>> {
    if panel.len() < 2 {
        return Err(Error::invalid("reserves", "need at least two quarters"));
    }
    let w = panel.reserves();
    let c = panel.purchases();
    Ok((1..w.len()).map(|t| (w[t] - w[t - 1]) / w[t - 1] - c[t] / w[t - 1]).collect())
}

/// Quarterly holding return of a constant-maturity zero-coupon bond.
///
/// Buys an `maturity_years` bond at the start-of-quarter yield and sells it a
/// quarter later, with `maturity_years - 0.25` remaining, at the end-of-quarter
/// yield. Yields compound annually.
pub fn zero_coupon_quarterly_return(y_start: f64, y_end: f64, maturity_years: f64) -> Result<f64> {
    if !maturity_years.is_finite() || maturity_years < 0.25 {
        return Err(Error::invalid("maturity_years", format!("{maturity_years} is below one quarter")));
    }
    for y in [y_start, y_end] {
        if !y.is_finite() || y <= -1.0 {
            return Err(Error::invalid("yield", format!("yield {y} must exceed -1")));
        }
    }
    let buy = (1.0 + y_start).powf(-maturity_years);
    let sell = (1.0 + y_end).powf(-(maturity_years - 0.25));
    Ok(sell / buy - 1.0)
}

pub fn equity_quarterly_return(index_start: f64, index_end: f64) -> Result<f64> {
    for v in [index_start, index_end] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid("index_level", format!("level {v} is not positive")));
        }
    }
    Ok(index_end / index_start - 1.0)
}

/// Shares after one period of exchange-rate moves with no rebalancing:
/// `b_i (1 + de_i) / sum_j b_j (1 + de_j)`.
pub fn drifted_shares(beta: &SimplexShares, fx_growth: &[f64]) -> Result<SimplexShares> {
    if fx_growth.len() != beta.len() {
        return Err(Error::invalid("fx_growth", "length differs from the share vector"));
    }
    if let Some(d) = fx_growth.iter().find(|d| !d.is_finite() || **d <= -1.0) {
        return Err(Error::invalid("fx_growth", format!("growth {d} must exceed -1")));
    }
    let values: Vec<f64> = beta
        .as_slice()
        .iter()
        .zip(fx_growth)
        .map(|(b, d)| b * (1.0 + d))
        .collect();
    SimplexShares::normalize(&values)
}

/// Derives the per-quarter return panel from market levels.
///
/// Row `t - 1` of the output covers the quarter ending at `market.quarters[t]`.
/// A currency with no yield curve at `maturity` uses `fallback[c]` as a
/// constant quarterly bond return; if that is also absent the currency is
/// rejected.
pub fn build_return_panel(
    market: &MarketPanel,
    maturity: Maturity,
    fallback: &[Option<f64>],
) -> Result<ReturnPanel> {
    let n = market.currencies.len();
    let t_len = market.quarters.len();
    if t_len < 2 {
        return Err(Error::invalid("market", "need at least two quarters"));
    }
    let mut bond = vec![vec![0.0; n]; t_len - 1];
    let mut equity = vec![vec![0.0; n]; t_len - 1];
    let mut fx_growth = vec![vec![0.0; n]; t_len - 1];
    for c in 0..n {
        let yields = market.yield_series(maturity, c);
        let constant = fallback.get(c).copied().flatten();
        if yields.is_none() && constant.is_none() {
            return Err(Error::config(
                "maturity_years",
                format!(
                    "no {}-year yields for {} and no fallback_return.{} configured",
                    maturity,
                    market.currencies.codes()[c],
                    market.currencies.codes()[c]
                ),
            ));
        }
        for t in 1..t_len {
            fx_growth[t - 1][c] = growth_rate(&[market.fx[t - 1][c], market.fx[t][c]])?[0];
            equity[t - 1][c] = equity_quarterly_return(market.equity[t - 1][c], market.equity[t][c])?;
            bond[t - 1][c] = match (yields, constant) {
                (Some(y), _) => zero_coupon_quarterly_return(y[t - 1], y[t], maturity.years())?,
                (None, Some(r)) => r,
                (None, None) => unreachable!(),
            };
        }
    }
    ReturnPanel::new(market.quarters[1..].to_vec(), bond, equity, fx_growth)
}
