//! Share vectors on the probability simplex.

use crate::error::{Error, Result};

/// Tolerance on the sum of a share vector.
pub const SIMPLEX_TOL: f64 = 1e-10;

/// A vector of nonnegative shares summing to one, indexed like a [`CurrencySet`].
///
/// [`CurrencySet`]: crate::accounting::CurrencySet
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexShares(Vec<f64>);

impl SimplexShares {
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::invalid("shares", "empty share vector"));
        }
        if let Some(bad) = shares.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::invalid("shares", format!("share {bad} is not a nonnegative number")));
        }
        let total: f64 = shares.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid("shares", format!("shares sum to {total}, not 1")));
        }
        Ok(Self(shares))
    }

    /// Rescale nonnegative weights onto the simplex.
    pub fn normalize(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights", "weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("weights", "weights sum to zero"));
        }
        Ok(Self(weights.iter().map(|w| w / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

impl AsRef<[f64]> for SimplexShares {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
