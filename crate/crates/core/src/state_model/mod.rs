//! The hidden Markov model. Shares follow a Dirichlet random walk whose USD
//! innovation variance is pinned; observations load linearly on the shares
//! with heavy-tailed errors.

mod dirichlet;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::accounting::ReturnRow;
use crate::error::{Error, Result};
use crate::simplex::SimplexShares;

pub use dirichlet::{
    dirichlet_from_mean_usd_std, prior_from_table, sample_dirichlet_into, DirichletMoments, DirichletParams,
};

/// Default USD-share innovation variance (a 1.5 percentage point quarterly standard deviation).
pub const DEFAULT_GAMMA: f64 = 0.015 * 0.015;
pub const DEFAULT_FLOOR: f64 = 0.01;
pub const DEFAULT_ALPHA_MIN: f64 = 1.0;

/// Density of the observation error scaled by `sigma_obs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObsDistribution {
    #[default]
    Laplace,
    Normal,
    Cauchy,
}

impl FromStr for ObsDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "laplace" => Ok(Self::Laplace),
            "normal" | "gaussian" => Ok(Self::Normal),
            "cauchy" => Ok(Self::Cauchy),
            other => Err(Error::config("distribution", format!("unknown distribution `{other}`"))),
        }
    }
}

impl fmt::Display for ObsDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Laplace => "laplace",
            Self::Normal => "normal",
            Self::Cauchy => "cauchy",
        })
    }
}

/// Static parameters of the transition and observation densities.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Variance of the quarterly USD-share innovation.
    pub gamma: f64,
    /// Minimum share substituted into the Dirichlet parameters.
    pub floor: f64,
    /// Scale used when the variance equation yields a nonpositive alpha.
    pub alpha_min: f64,
    pub obs_dist: ObsDistribution,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            floor: DEFAULT_FLOOR,
            alpha_min: DEFAULT_ALPHA_MIN,
            obs_dist: ObsDistribution::Laplace,
        }
    }
}

impl ModelParams {
    /// Checks parameter ranges for a model over `n_currencies` currencies.
    pub fn validate(&self, n_currencies: usize) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 0.25) {
            return Err(Error::config("gamma", format!("{} is outside (0, 0.25)", self.gamma)));
        }
        if !(self.floor >= 0.0 && self.floor < 1.0 / n_currencies as f64) {
            return Err(Error::config(
                "floor",
                format!("{} is outside [0, 1/{n_currencies})", self.floor),
            ));
        }
        if !(self.alpha_min > 0.0) || !self.alpha_min.is_finite() {
            return Err(Error::config("alpha_min", format!("{} must be positive", self.alpha_min)));
        }
        Ok(())
    }
}

/// Dirichlet scale for a given USD share, with a flag when it had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaScale {
    pub value: f64,
    pub clamped: bool,
}

/// `alpha = (b - b^2 - gamma) / gamma`, which pins the USD share's transition variance to `gamma`.
///
/// When `b(1 - b) <= gamma` the formula is nonpositive; the result is then
/// `alpha_min` with `clamped` set.
pub fn alpha_scale(beta_usd: f64, gamma: f64, alpha_min: f64) -> Result<AlphaScale> {
    if !(beta_usd > 0.0 && beta_usd < 1.0) {
        return Err(Error::invalid("beta_usd", format!("{beta_usd} is not strictly inside (0, 1)")));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", format!("{gamma} must be positive")));
    }
    let alpha = (beta_usd - beta_usd * beta_usd - gamma) / gamma;
    if alpha > 0.0 {
        Ok(AlphaScale { value: alpha, clamped: false })
    } else {
        Ok(AlphaScale { value: alpha_min, clamped: true })
    }
}

/// Conditional variance-covariance of next quarter's shares given `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMoments {
    pub alpha: AlphaScale,
    pub variance: Vec<f64>,
    /// Full matrix; the diagonal repeats `variance`.
    pub covariance: Vec<Vec<f64>>,
}

pub fn transition_moments(beta: &SimplexShares, usd_index: usize, params: &ModelParams) -> Result<TransitionMoments> {
    let b = beta.as_slice();
    if b.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err(Error::invalid("beta", "moments need every share strictly inside (0, 1)"));
    }
    let alpha = alpha_scale(b[usd_index], params.gamma, params.alpha_min)?;
    let denom = alpha.value + 1.0;
    let covariance: Vec<Vec<f64>> = (0..b.len())
        .map(|i| {
            (0..b.len())
                .map(|j| if i == j { b[i] * (1.0 - b[i]) / denom } else { -b[i] * b[j] / denom })
                .collect()
        })
        .collect();
    let variance = (0..b.len()).map(|i| covariance[i][i]).collect();
    Ok(TransitionMoments { alpha, variance, covariance })
}

/// Writes the Dirichlet parameters of the transition from `beta` into `out`.
///
/// Shares below the floor are replaced by the floor (no renormalization); the
/// scale comes from the floored USD share. Returns the scale.
pub fn transition_params_into(beta: &[f64], usd_index: usize, params: &ModelParams, out: &mut [f64]) -> AlphaScale {
    let usd = beta[usd_index].max(params.floor);
    let alpha = if usd > 0.0 && usd < 1.0 {
        alpha_scale(usd, params.gamma, params.alpha_min).expect("validated inputs")
    } else {
        AlphaScale { value: params.alpha_min, clamped: true }
    };
    for (o, b) in out.iter_mut().zip(beta) {
        // a zero share with a zero floor still needs a positive parameter
        *o = (alpha.value * b.max(params.floor)).max(f64::MIN_POSITIVE);
    }
    alpha
}

/// Draws next quarter's shares into `out`; returns whether the scale was clamped.
pub fn transition_sample_into<R: Rng + ?Sized>(
    beta: &[f64],
    usd_index: usize,
    params: &ModelParams,
    rng: &mut R,
    scratch: &mut [f64],
    out: &mut [f64],
) -> bool {
    let alpha = transition_params_into(beta, usd_index, params, scratch);
    sample_dirichlet_into(scratch, rng, out);
    alpha.clamped
}

/// One draw from the share transition, with the clamp flag.
pub fn transition_sample<R: Rng + ?Sized>(
    beta: &SimplexShares,
    usd_index: usize,
    params: &ModelParams,
    rng: &mut R,
) -> (SimplexShares, bool) {
    let n = beta.len();
    let mut scratch = vec![0.0; n];
    let mut out = vec![0.0; n];
    let clamped = transition_sample_into(beta.as_slice(), usd_index, params, rng, &mut scratch, &mut out);
    (SimplexShares::new(out).expect("dirichlet draw on simplex"), clamped)
}

/// Per-currency loadings `g_i` such that the predicted observation is `sum_i beta_i g_i`.
///
/// `g_i = x [(1 + r_eq,i) de_i + r_eq,i] + (1 - x) [(1 + r_bd,i) de_i + r_bd,i]`.
pub fn observation_loadings(x_eq: f64, row: ReturnRow<'_>) -> Vec<f64> {
    row.fx_growth
        .iter()
        .zip(row.equity.iter().zip(row.bond))
        .map(|(de, (req, rbd))| x_eq * ((1.0 + req) * de + req) + (1.0 - x_eq) * ((1.0 + rbd) * de + rbd))
        .collect()
}

/// Predicted non-purchase rate of change for shares `beta` and equity share `x_eq`.
pub fn predict_observation(beta: &[f64], x_eq: f64, row: ReturnRow<'_>) -> Result<f64> {
    if !(0.0..=1.0).contains(&x_eq) {
        return Err(Error::invalid("x_eq", format!("equity share {x_eq} outside [0, 1]")));
    }
    if beta.len() != row.fx_growth.len() {
        return Err(Error::invalid("beta", "length differs from the return row"));
    }
    Ok(dot(beta, &observation_loadings(x_eq, row)))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Log-density of observing `y` when the prediction is `mu` and the scale is `sigma`.
pub fn obs_loglik(y: f64, mu: f64, sigma: f64, dist: ObsDistribution) -> f64 {
    debug_assert!(sigma > 0.0);
    let z = (y - mu) / sigma;
    match dist {
        ObsDistribution::Laplace => -(2.0 * sigma).ln() - z.abs(),
        ObsDistribution::Normal => -0.5 * (2.0 * PI).ln() - sigma.ln() - 0.5 * z * z,
        ObsDistribution::Cauchy => -(PI * sigma).ln() - (z * z).ln_1p(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const G: f64 = DEFAULT_GAMMA;

    #[test]
    fn alpha_examples() {
        // (b - b^2 - g) / g evaluated by hand
        let a = alpha_scale(0.68, G, 1.0).unwrap();
        assert!((a.value - 966.1111111111111).abs() < 1e-9 && !a.clamped);
        let a = alpha_scale(0.50, G, 1.0).unwrap();
        assert!((a.value - 1_110.111_111_111_111).abs() < 1e-9);
        // b(1 - b) = g exactly when b = 0.25 and g = 0.1875
        let a = alpha_scale(0.25, 0.1875, 1.0).unwrap();
        assert!(a.clamped && a.value == 1.0);
        assert!(alpha_scale(1.0, G, 1.0).is_err());
    }

    #[test]
    fn moments_pin_usd_variance() {
        let params = ModelParams::default();
        let beta = SimplexShares::new(vec![0.6, 0.3, 0.1]).unwrap();
        let m = transition_moments(&beta, 0, &params).unwrap();
        assert!((m.variance[0] - G).abs() / G < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(m.covariance[i][j] < 0.0);
                }
            }
        }
    }

    #[test]
    fn two_currency_moments() {
        let params = ModelParams::default();
        let beta = SimplexShares::new(vec![0.6, 0.4]).unwrap();
        let m = transition_moments(&beta, 0, &params).unwrap();
        assert!((m.variance[0] - G).abs() < 1e-15);
        assert!((m.variance[1] - G).abs() < 1e-15);
        assert!((m.covariance[0][1] + G).abs() < 1e-15);
    }

    #[test]
    fn floor_substitutes_parameter() {
        let params = ModelParams::default();
        let beta = [0.7, 0.295, 0.005];
        let mut out = [0.0; 3];
        let a = transition_params_into(&beta, 0, &params, &mut out);
        assert_eq!(out[2], a.value * 0.01);
        assert_eq!(out[0], a.value * 0.7);
    }

    #[test]
    fn floor_applies_to_usd_scale() {
        let params = ModelParams::default();
        let beta = [0.001, 0.999 - 1e-12, 1e-12];
        let mut out = [0.0; 3];
        let a = transition_params_into(&beta, 0, &params, &mut out);
        let expected = alpha_scale(0.01, G, 1.0).unwrap();
        assert_eq!(a, expected);
    }

    #[test]
    fn exact_mean_is_martingale_when_floor_slack() {
        let params = ModelParams::default();
        let beta = [0.55, 0.25, 0.12, 0.08];
        let mut out = [0.0; 4];
        transition_params_into(&beta, 0, &params, &mut out);
        let p = DirichletParams::new(out.to_vec()).unwrap();
        for (m, b) in p.moments().mean.iter().zip(beta) {
            assert!((m - b).abs() < 1e-14);
        }
    }

    #[test]
    fn transition_draw_on_simplex() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let beta = SimplexShares::new(vec![0.6, 0.3, 0.1]).unwrap();
        let (next, clamped) = transition_sample(&beta, 0, &ModelParams::default(), &mut rng);
        assert!(!clamped);
        assert_eq!(next.len(), 3);
    }

    #[test]
    fn prediction_examples() {
        let zeros = [0.0, 0.0];
        let row = ReturnRow { bond: &zeros, equity: &zeros, fx_growth: &zeros };
        assert_eq!(predict_observation(&[0.5, 0.5], 0.3, row).unwrap(), 0.0);

        let row = ReturnRow { bond: &[0.02, 0.02], equity: &[0.10, 0.10], fx_growth: &zeros };
        let mu = predict_observation(&[0.5, 0.5], 0.25, row).unwrap();
        assert!((mu - 0.04).abs() < 1e-15);
        assert!(predict_observation(&[0.5, 0.5], 1.5, row).is_err());
    }

    #[test]
    fn loglik_examples() {
        let s = 0.01;
        let ll = obs_loglik(0.3, 0.3, s, ObsDistribution::Laplace);
        assert!((ll + (2.0 * s).ln()).abs() < 1e-12);
        let ll = obs_loglik(0.3 + s, 0.3, s, ObsDistribution::Laplace);
        assert!((ll + (2.0 * s).ln() + 1.0).abs() < 1e-9);
        let lap = obs_loglik(6.0 * s, 0.0, s, ObsDistribution::Laplace);
        let nor = obs_loglik(6.0 * s, 0.0, s, ObsDistribution::Normal);
        assert!(lap > nor);
    }

    #[test]
    fn loglik_peaks_at_mu() {
        for dist in [ObsDistribution::Laplace, ObsDistribution::Normal, ObsDistribution::Cauchy] {
            let peak = obs_loglik(0.1, 0.1, 0.02, dist);
            for dy in [-0.05, -0.001, 0.001, 0.03] {
                assert!(obs_loglik(0.1 + dy, 0.1, 0.02, dist) < peak);
            }
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        // composite Simpson on [-60 sigma, 60 sigma]
        let sigma = 0.004;
        let (a, b, n) = (-60.0 * sigma, 60.0 * sigma, 200_000usize);
        let h = (b - a) / n as f64;
        for dist in [ObsDistribution::Laplace, ObsDistribution::Normal] {
            let f = |x: f64| obs_loglik(x, 0.0, sigma, dist).exp();
            let mut acc = f(a) + f(b);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(a + k as f64 * h);
            }
            let integral = acc * h / 3.0;
            assert!((integral - 1.0).abs() < 1e-6, "{dist}: {integral}");
        }
    }

    #[test]
    fn params_validation() {
        let mut p = ModelParams::default();
        assert!(p.validate(6).is_ok());
        p.gamma = 0.3;
        assert!(p.validate(6).is_err());
        p.gamma = G;
        p.floor = 0.2;
        assert!(p.validate(6).is_err());
    }

    #[test]
    fn distribution_parse() {
        assert_eq!("Laplace".parse::<ObsDistribution>().unwrap(), ObsDistribution::Laplace);
        assert_eq!("cauchy".parse::<ObsDistribution>().unwrap(), ObsDistribution::Cauchy);
        assert!("student".parse::<ObsDistribution>().is_err());
    }
}
