use rand::Rng;

use crate::error::{Error, Result};
use crate::state_model::{obs_loglik, ObsDistribution};

/// Normalized posterior weights `w_i ∝ prior_i * p(y | mu_i)`.
///
/// Computed from log-weights with the maximum subtracted, so a sharply
/// peaked likelihood does not underflow. Fails if every weight vanishes.
pub fn reweight(prior: &[f64], y: f64, mu: &[f64], sigma: f64, dist: ObsDistribution) -> Result<Vec<f64>> {
    if prior.len() != mu.len() {
        return Err(Error::invalid("weights", "weights and predictions differ in length"));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("{sigma} must be positive")));
    }
    let loglik: Vec<f64> = mu.iter().map(|m| obs_loglik(y, *m, sigma, dist)).collect();
    normalize_log_weights(prior, &loglik)
}

/// Shared by [`reweight`] and the filter loop, which computes log-likelihoods in parallel.
pub(crate) fn normalize_log_weights(prior: &[f64], loglik: &[f64]) -> Result<Vec<f64>> {
    let log_w: Vec<f64> = prior
        .iter()
        .zip(loglik)
        .map(|(w, l)| if *w > 0.0 { w.ln() + l } else { f64::NEG_INFINITY })
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::invalid(
            "weights",
            format!("every particle has zero likelihood (max log-weight {max})"),
        ));
    }
    let mut w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

/// `1 / sum w_i^2` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// `n` independent draws from the categorical distribution given by `weights`.
pub fn multinomial_resample<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights", "weights must be finite and nonnegative"));
    }
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::invalid("weights", "weights sum to zero"));
    }
    let last = weights.len() - 1;
    Ok((0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|c| *c <= u).min(last)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn identical_particles_keep_uniform_weights() {
        let w = reweight(&[0.25; 4], 0.01, &[0.003; 4], 0.002, ObsDistribution::Laplace).unwrap();
        assert!(w.iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn log_three_difference() {
        let w = normalize_log_weights(&[0.5, 0.5], &[3f64.ln() - 700.0, -700.0]).unwrap();
        assert!((w[0] - 0.75).abs() < 1e-12 && (w[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn tail_observation_laplace_less_concentrated() {
        let entropy = |w: &[f64]| -w.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>();
        let mu = [0.0, 0.004];
        let y = 0.05; // far into the tail for sigma 0.002
        let lap = reweight(&[0.5, 0.5], y, &mu, 0.002, ObsDistribution::Laplace).unwrap();
        let nor = reweight(&[0.5, 0.5], y, &mu, 0.002, ObsDistribution::Normal).unwrap();
        assert!(entropy(&lap) > entropy(&nor));
    }

    #[test]
    fn collapse_is_an_error() {
        assert!(normalize_log_weights(&[0.5, 0.5], &[f64::NEG_INFINITY; 2]).is_err());
        assert!(reweight(&[0.5, 0.5], 0.0, &[0.0, 0.0], 0.0, ObsDistribution::Normal).is_err());
    }

    #[test]
    fn degenerate_weights_resample_to_one_index() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let idx = multinomial_resample(&[1.0, 0.0, 0.0, 0.0], 1000, &mut rng).unwrap();
        assert!(idx.iter().all(|i| *i == 0));
        let idx = multinomial_resample(&[0.0, 0.0, 1.0], 1000, &mut rng).unwrap();
        assert!(idx.iter().all(|i| *i == 2));
    }

    #[test]
    fn ess_bounds() {
        assert!((effective_sample_size(&[0.25; 4]) - 4.0).abs() < 1e-12);
        assert!((effective_sample_size(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}
