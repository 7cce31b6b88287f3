use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::stats;

use super::{nonpurchase_rate, ObservationSeries, Quarter, ReservePanel};

/// Minimum number of daily SDR levels per quarter.
pub const MIN_DAILY_OBS: usize = 10;

/// Per-quarter sample standard deviation of daily proportional SDR/USD changes.
///
/// Only changes between consecutive observations dated inside the same
/// quarter are used; nothing crosses a quarter boundary. `daily` must be
/// sorted by date.
pub fn sdr_quarterly_vol(daily: &[(NaiveDate, f64)], quarters: &[Quarter]) -> Result<Vec<f64>> {
    if daily.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::invalid("daily_sdr", "dates must be strictly increasing"));
    }
    if let Some((d, v)) = daily.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("daily_sdr", format!("rate {v} on {d} is not positive")));
    }
    quarters
        .iter()
        .map(|&q| {
            let start = daily.partition_point(|(d, _)| Quarter::of_date(*d) < q);
            let end = daily.partition_point(|(d, _)| Quarter::of_date(*d) <= q);
            let window = &daily[start..end];
            if window.len() < MIN_DAILY_OBS {
                return Err(Error::InsufficientDaily {
                    quarter: q,
                    found: window.len(),
                    required: MIN_DAILY_OBS,
                });
            }
            let changes: Vec<f64> = window.windows(2).map(|w| (w[1].1 - w[0].1) / w[0].1).collect();
            Ok(stats::sample_std(&changes).expect("at least nine changes"))
        })
        .collect()
}

/// Rescales a volatility index so its mean equals `target`, by default half
/// the interquartile range of `|y|`.
///
/// Quarters with zero volatility are lifted to the smallest positive value in
/// the series before scaling, so every output is positive. A degenerate `y`
/// (zero IQR) with no explicit `target` is rejected.
pub fn scale_obs_vol(quarterly_vol: &[f64], y: &[f64], target: Option<f64>) -> Result<Vec<f64>> {
    if quarterly_vol.is_empty() || y.is_empty() {
        return Err(Error::invalid("obs_vol", "empty input series"));
    }
    if quarterly_vol.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("obs_vol", "volatilities must be finite and nonnegative"));
    }
    let floor = quarterly_vol
        .iter()
        .copied()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(Error::invalid("obs_vol", "volatility is zero in every quarter"));
    }
    let target = match target {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::config("sigma_obs.mean", format!("{t} must be positive"))),
        None => {
            let abs_y: Vec<f64> = y.iter().map(|v| v.abs()).collect();
            let half_iqr = stats::interquartile_range(&abs_y) / 2.0;
            if !(half_iqr > 0.0) {
                return Err(Error::Degenerate(
                    "interquartile range of |y| is zero; set sigma_obs.mean in the config".into(),
                ));
            }
            half_iqr
        }
    };
    let lifted: Vec<f64> = quarterly_vol.iter().map(|v| if *v > 0.0 { *v } else { floor }).collect();
    let k = target / stats::mean(&lifted);
    Ok(lifted.iter().map(|v| v * k).collect())
}

/// Observation series for every quarter after the first in `reserves`.
pub fn build_observations(
    reserves: &ReservePanel,
    daily_sdr: &[(NaiveDate, f64)],
    sigma_mean: Option<f64>,
) -> Result<ObservationSeries> {
    let y = nonpurchase_rate(reserves)?;
    let quarters = reserves.quarters()[1..].to_vec();
    let vol = sdr_quarterly_vol(daily_sdr, &quarters)?;
    let sigma = scale_obs_vol(&vol, &y, sigma_mean)?;
    ObservationSeries::new(quarters, y, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Datelike;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn weekdays(q: Quarter) -> Vec<NaiveDate> {
        let first = NaiveDate::from_ymd_opt(q.year(), (q.q() as u32 - 1) * 3 + 1, 1).unwrap();
        first
            .iter_days()
            .take_while(|d| Quarter::of_date(*d) == q)
            .filter(|d| d.weekday().number_from_monday() <= 5)
            .collect()
    }

    #[test]
    fn constant_series_has_zero_vol() {
        let qs = Quarter::range("2021Q1".parse().unwrap(), "2021Q3".parse().unwrap());
        let daily: Vec<_> = qs.iter().flat_map(|q| weekdays(*q)).map(|d| (d, 1.4)).collect();
        assert_eq!(sdr_quarterly_vol(&daily, &qs).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn alternating_changes() {
        let q: Quarter = "2021Q2".parse().unwrap();
        let days: Vec<_> = weekdays(q).into_iter().take(20).collect();
        let mut level = 1.0;
        let mut daily = Vec::new();
        for (k, d) in days.into_iter().enumerate() {
            daily.push((d, level));
            level *= if k % 2 == 0 { 1.01 } else { 0.99 };
        }
        let vol = sdr_quarterly_vol(&daily, &[q]).unwrap()[0];
        // oracle: sample std of 19 alternating +-0.01 values (numpy ddof=1)
        assert!((vol - 0.010259783520851542).abs() < 1e-12, "{vol}");
    }

    #[test]
    fn gaussian_daily_changes_recover_sigma() {
        let q: Quarter = "2019Q4".parse().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.005).unwrap();
        let mut level = 1.4;
        let mut daily = Vec::new();
        for d in weekdays(q) {
            daily.push((d, level));
            level *= 1.0 + noise.sample(&mut rng);
        }
        let n = (daily.len() - 1) as f64;
        let vol = sdr_quarterly_vol(&daily, &[q]).unwrap()[0];
        // standard error of a sample std is about sigma / sqrt(2(n - 1))
        let se = 0.005 / (2.0 * (n - 1.0)).sqrt();
        assert!((vol - 0.005).abs() < 3.0 * se, "{vol}");
    }

    #[test]
    fn short_quarter_rejected() {
        let q: Quarter = "2021Q1".parse().unwrap();
        let daily: Vec<_> = weekdays(q).into_iter().take(5).map(|d| (d, 1.0)).collect();
        match sdr_quarterly_vol(&daily, &[q]) {
            Err(Error::InsufficientDaily { quarter, found: 5, .. }) => assert_eq!(quarter, q),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_cross_quarter_changes() {
        let a: Quarter = "2021Q1".parse().unwrap();
        let b = a.next();
        // flat inside each quarter, a jump between them
        let mut daily: Vec<_> = weekdays(a).into_iter().map(|d| (d, 1.0)).collect();
        daily.extend(weekdays(b).into_iter().map(|d| (d, 2.0)));
        assert_eq!(sdr_quarterly_vol(&daily, &[a, b]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn scale_examples() {
        // |y| = (0, 0.016, 0.032): linear quartiles 0.008 and 0.024, half-IQR 0.008
        let y = [0.0, -0.016, 0.032];
        let s = scale_obs_vol(&[0.002, 0.004, 0.006], &y, None).unwrap();
        for (a, b) in s.iter().zip([0.004, 0.008, 0.012]) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        let s = scale_obs_vol(&[0.3; 4], &y, None).unwrap();
        assert!(s.iter().all(|v| (v - 0.008).abs() < 1e-15));
        let s = scale_obs_vol(&[0.002, 0.004, 0.006], &y, Some(0.002)).unwrap();
        assert!((s[1] - 0.002).abs() < 1e-15);
    }

    #[test]
    fn degenerate_y_rejected() {
        assert!(matches!(scale_obs_vol(&[0.1, 0.2], &[0.01, 0.01, 0.01], None), Err(Error::Degenerate(_))));
        assert!(scale_obs_vol(&[0.1, 0.2], &[0.01, 0.01, 0.01], Some(0.004)).is_ok());
        assert!(scale_obs_vol(&[0.0, 0.0], &[0.01, 0.03], None).is_err());
    }

    #[test]
    fn zero_vol_quarters_are_lifted() {
        let s = scale_obs_vol(&[0.0, 0.002, 0.004], &[0.0, 0.01, 0.02, 0.04], Some(0.01)).unwrap();
        assert!(s.iter().all(|v| *v > 0.0));
        assert_eq!(s[0], s[1]);
    }

    proptest! {
        #[test]
        fn scaled_mean_is_half_iqr(
            vol in prop::collection::vec(1e-4f64..1e-2, 1..50),
            y in prop::collection::vec(-0.1f64..0.1, 4..60),
        ) {
            let abs: Vec<f64> = y.iter().map(|v| v.abs()).collect();
            let h = stats::interquartile_range(&abs) / 2.0;
            prop_assume!(h > 1e-9);
            let s = scale_obs_vol(&vol, &y, None).unwrap();
            prop_assert!(((stats::mean(&s) - h) / h).abs() <= 1e-12);
        }
    }
}
