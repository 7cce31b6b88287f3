//! Small descriptive statistics used across modules.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator). `None` for fewer than two values.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Quantile with linear interpolation between order statistics
/// (position `p * (n - 1)` in the sorted sample).
pub fn quantile_linear(xs: &[f64], p: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty sample");
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn interquartile_range(xs: &[f64]) -> f64 {
    quantile_linear(xs, 0.75) - quantile_linear(xs, 0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_quantiles() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile_linear(&xs, 0.0), 1.0);
        assert_eq!(quantile_linear(&xs, 1.0), 4.0);
        assert_eq!(quantile_linear(&xs, 0.5), 2.5);
        // positions 0.75 and 2.25
        assert_eq!(interquartile_range(&xs), 3.25 - 1.75);
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        assert_eq!(sample_std(&[1.0]), None);
        let s = sample_std(&[1.0, 3.0]).unwrap();
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
