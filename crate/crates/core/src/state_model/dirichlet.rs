//! Dirichlet parameters with their moments and sampler.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};

use crate::error::{Error, Result};
use crate::simplex::SimplexShares;

/// Positive Dirichlet concentration parameters, one per currency.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams(Vec<f64>);

/// Marginal means and standard deviations implied by a [`DirichletParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMoments {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DirichletParams {
    pub fn new(params: Vec<f64>) -> Result<Self> {
        if params.len() < 2 {
            return Err(Error::invalid("dirichlet", "need at least two parameters"));
        }
        if let Some(a) = params.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::invalid("dirichlet", format!("parameter {a} is not positive")));
        }
        Ok(Self(params))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of the parameters.
    pub fn concentration(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn moments(&self) -> DirichletMoments {
        let s = self.concentration();
        let mean: Vec<f64> = self.0.iter().map(|a| a / s).collect();
        let std = mean.iter().map(|m| (m * (1.0 - m) / (s + 1.0)).sqrt()).collect();
        DirichletMoments { mean, std }
    }

    /// Same mean, with every marginal standard deviation multiplied by `factor`.
    pub fn widened(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::invalid("prior_width", format!("width factor {factor} must be positive")));
        }
        let s = self.concentration();
        let widened = (s + 1.0) / (factor * factor) - 1.0;
        if !(widened > 0.0) {
            return Err(Error::invalid(
                "prior_width",
                format!("width factor {factor} leaves no valid concentration"),
            ));
        }
        Self::new(self.0.iter().map(|a| a / s * widened).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SimplexShares {
        let mut out = vec![0.0; self.len()];
        sample_dirichlet_into(&self.0, rng, &mut out);
        SimplexShares::new(out).expect("normalized gamma draws lie on the simplex")
    }
}

/// Dirichlet parameters with a given mean whose USD marginal has standard deviation `usd_std`.
///
/// The concentration is `m(1 - m) / usd_std^2 - 1` with `m` the USD mean.
pub fn dirichlet_from_mean_usd_std(mean: &SimplexShares, usd_index: usize, usd_std: f64) -> Result<DirichletParams> {
    if usd_index >= mean.len() {
        return Err(Error::invalid("usd_index", "out of range"));
    }
    if mean.as_slice().iter().any(|m| !(*m > 0.0)) {
        return Err(Error::invalid("prior.mean", "every mean share must be strictly positive"));
    }
    let m = mean.get(usd_index);
    let max_var = m * (1.0 - m);
    if !(usd_std > 0.0) || usd_std * usd_std >= max_var {
        return Err(Error::invalid(
            "prior.usd_std",
            format!("std {usd_std} infeasible for a USD mean of {m} (variance must be below {max_var})"),
        ));
    }
    let s = max_var / (usd_std * usd_std) - 1.0;
    DirichletParams::new(mean.as_slice().iter().map(|b| b * s).collect())
}

/// Validates a raw parameter row and reports its implied moments.
pub fn prior_from_table(raw: &[f64]) -> Result<(DirichletParams, DirichletMoments)> {
    let params = DirichletParams::new(raw.to_vec())?;
    let moments = params.moments();
    Ok((params, moments))
}

/// Draws one Dirichlet vector into `out` from independent unit-scale Gamma variates.
///
/// Work happens in log space: a shape `a < 1` draw is `G(a + 1) * U^(1/a)`,
/// whose log is finite even when the variate itself would underflow. The
/// vector is then normalized with the largest log subtracted.
pub fn sample_dirichlet_into<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R, out: &mut [f64]) {
    debug_assert_eq!(alpha.len(), out.len());
    let mut max = f64::NEG_INFINITY;
    for (a, slot) in alpha.iter().zip(out.iter_mut()) {
        *slot = log_gamma_variate(*a, rng);
        max = max.max(*slot);
    }
    let mut total = 0.0;
    for slot in out.iter_mut() {
        *slot = (*slot - max).exp();
        total += *slot;
    }
    for slot in out.iter_mut() {
        *slot /= total;
    }
}

fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = Open01.sample(rng);
        g.ln() + u.ln() / shape
    }
}
