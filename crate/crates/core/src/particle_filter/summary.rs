use crate::accounting::{CurrencySet, Quarter};
use crate::error::{Error, Result};

/// Default reporting probabilities.
pub const DEFAULT_QUANTILES: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];

/// Interval levels reported by calibration curves.
pub const CALIBRATION_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

// Slack on cumulative weights so rounding in normalized weights does not
// push a quantile onto the next particle.
const CUM_TOL: f64 = 1e-12;

/// Smallest value whose cumulative weight reaches `p`, after sorting by value.
pub fn weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    Ok(weighted_quantiles(values, weights, &[p])?[0])
}

/// [`weighted_quantile`] at several probabilities with one sort.
pub fn weighted_quantiles(values: &[f64], weights: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::invalid("values", "need equally long, nonempty values and weights"));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid("p", format!("probability {p} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|a, b| values[*a].total_cmp(&values[*b]).then(a.cmp(b)));
    let mut acc = 0.0;
    let cumulative: Vec<f64> = order
        .iter()
        .map(|&i| {
            acc += weights[i];
            acc
        })
        .collect();
    let total = acc;
    let last = order.len() - 1;
    Ok(probs
        .iter()
        .map(|p| {
            let target = p * total - CUM_TOL * total;
            let k = cumulative.partition_point(|c| *c < target).min(last);
            values[order[k]]
        })
        .collect())
}

/// Per-quarter posterior summaries produced by the filter.
///
/// Row 0 is the prior, dated one quarter before the first observation; rows
/// `1..` are filtering posteriors given observations through that quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSummary {
    pub currencies: CurrencySet,
    pub probs: Vec<f64>,
    pub quarters: Vec<Quarter>,
    /// `[quarter][currency][prob]`.
    pub quantiles: Vec<Vec<Vec<f64>>>,
    /// Weighted median share per quarter and currency.
    pub median: Vec<Vec<f64>>,
    /// Observed non-purchase rate; `None` for the prior row.
    pub observed: Vec<Option<f64>>,
    /// Prediction at the per-currency weighted medians.
    pub predicted_median: Vec<Option<f64>>,
    pub sigma_obs: Vec<Option<f64>>,
    /// Effective sample size before resampling.
    pub ess: Vec<Option<f64>>,
    /// Particles whose transition scale was clamped, per quarter.
    pub alpha_clamped: Vec<usize>,
}

impl FilterSummary {
    pub fn prob_index(&self, p: f64) -> Option<usize> {
        self.probs.iter().position(|q| (q - p).abs() < 1e-9)
    }

    pub fn quarter_index(&self, q: Quarter) -> Option<usize> {
        self.quarters.iter().position(|x| *x == q)
    }

    /// Quantile `p` of currency `c` at row `t`, if `p` was recorded.
    pub fn quantile(&self, t: usize, c: usize, p: f64) -> Option<f64> {
        self.prob_index(p).map(|k| self.quantiles[t][c][k])
    }
}

/// Probabilities needed to bound the central intervals at `levels`.
pub fn interval_probs(levels: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(levels.len() * 2);
    for l in levels {
        out.push((1.0 - l) / 2.0);
        out.push((1.0 + l) / 2.0);
    }
    out
}

/// Union of `a` and `b`, sorted, with near-duplicates removed.
pub fn merge_probs(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    all
}

/// A self-reported share for one quarter and currency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportedShare {
    pub quarter: Quarter,
    pub currency: usize,
    pub share: f64,
}

/// Coverage of central credible intervals at one level for one currency.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPoint {
    pub level: f64,
    pub currency: String,
    pub coverage: f64,
    pub n_reports: usize,
}

/// Fraction of reporting quarters whose reported share lies inside the
/// central `level` interval `[q((1 - level)/2), q((1 + level)/2)]`.
///
/// Reports for quarters the summary does not cover are ignored. Currencies
/// without any usable report are omitted.
pub fn calibration_curve(
    summary: &FilterSummary,
    reported: &[ReportedShare],
    levels: &[f64],
) -> Result<Vec<CalibrationPoint>> {
    let usable: Vec<(usize, &ReportedShare)> = reported
        .iter()
        .filter_map(|r| summary.quarter_index(r.quarter).map(|t| (t, r)))
        .collect();
    if usable.is_empty() {
        return Err(Error::Data("no reported shares fall inside the filtered quarters".into()));
    }
    let mut out = Vec::new();
    for &level in levels {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::invalid("level", format!("{level} outside [0, 1]")));
        }
        let lo_p = (1.0 - level) / 2.0;
        let hi_p = (1.0 + level) / 2.0;
        let (lo_k, hi_k) = match (summary.prob_index(lo_p), summary.prob_index(hi_p)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::invalid(
                    "level",
                    format!("summary lacks the {lo_p} and {hi_p} quantiles for level {level}"),
                ))
            }
        };
        for (c, code) in summary.currencies.codes().iter().enumerate() {
            let hits: Vec<bool> = usable
                .iter()
                .filter(|(_, r)| r.currency == c)
                .map(|(t, r)| {
                    let q = &summary.quantiles[*t][c];
                    q[lo_k] <= r.share && r.share <= q[hi_k]
                })
                .collect();
            if hits.is_empty() {
                continue;
            }
            let covered = hits.iter().filter(|h| **h).count();
            out.push(CalibrationPoint {
                level,
                currency: code.clone(),
                coverage: covered as f64 / hits.len() as f64,
                n_reports: hits.len(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_examples() {
        let u = [1.0 / 3.0; 3];
        assert_eq!(weighted_quantile(&[1.0, 2.0, 3.0], &u, 0.5).unwrap(), 2.0);
        assert_eq!(weighted_quantile(&[3.0, 1.0, 2.0], &u, 0.0).unwrap(), 1.0);
        assert_eq!(weighted_quantile(&[3.0, 1.0, 2.0], &u, 1.0).unwrap(), 3.0);
        assert_eq!(weighted_quantile(&[1.0, 2.0], &[0.9, 0.1], 0.5).unwrap(), 1.0);
        assert!(weighted_quantile(&[1.0], &[1.0], 1.5).is_err());
    }

    #[test]
    fn uniform_tenths_do_not_overshoot() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        let w = vec![0.1; 10];
        let q = weighted_quantiles(&v, &w, &[0.1, 0.3, 0.9]).unwrap();
        assert_eq!(q, vec![1.0, 3.0, 9.0]);
    }

    fn toy_summary(median: f64) -> FilterSummary {
        let probs = merge_probs(&DEFAULT_QUANTILES, &interval_probs(&CALIBRATION_LEVELS));
        let q0: Quarter = "2020Q1".parse().unwrap();
        let quarters = vec![q0, q0.next(), q0.next().next()];
        let row: Vec<f64> = probs.iter().map(|p| median + (p - 0.5) * 0.2).collect();
        FilterSummary {
            currencies: CurrencySet::new(&["USD", "EUR"]).unwrap(),
            probs,
            quarters: quarters.clone(),
            quantiles: vec![vec![row.clone(), row]; 3],
            median: vec![vec![median; 2]; 3],
            observed: vec![None; 3],
            predicted_median: vec![None; 3],
            sigma_obs: vec![None; 3],
            ess: vec![None; 3],
            alpha_clamped: vec![0; 3],
        }
    }

    #[test]
    fn reported_at_median_fully_covered() {
        let s = toy_summary(0.6);
        let reported: Vec<ReportedShare> = s.quarters[1..]
            .iter()
            .map(|q| ReportedShare { quarter: *q, currency: 0, share: 0.6 })
            .collect();
        let curve = calibration_curve(&s, &reported, &CALIBRATION_LEVELS).unwrap();
        assert_eq!(curve.len(), CALIBRATION_LEVELS.len());
        assert!(curve.iter().all(|p| p.coverage == 1.0 && p.currency == "USD"));
    }

    #[test]
    fn reported_outside_not_covered() {
        let s = toy_summary(0.6);
        let reported = vec![ReportedShare { quarter: s.quarters[2], currency: 1, share: 0.95 }];
        let curve = calibration_curve(&s, &reported, &[0.9]).unwrap();
        assert_eq!(curve[0].coverage, 0.0);
        assert!(calibration_curve(&s, &[], &[0.9]).is_err());
        let missing = vec![ReportedShare { quarter: "1999Q1".parse().unwrap(), currency: 0, share: 0.5 }];
        assert!(calibration_curve(&s, &missing, &[0.9]).is_err());
    }
}
