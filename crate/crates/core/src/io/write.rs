//! Tidy CSV outputs, dataset serialization and run metadata.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::equity_share::EquityShareSeries;
use crate::error::{Error, Result};
use crate::io::config::DataPaths;
use crate::io::load::CountryDataset;
use crate::particle_filter::{CalibrationPoint, FilterSummary};
use crate::simplex_lsq::BaselineSeries;

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Column name for probability `p`: `0.1` gives `p10`, `0.025` gives `p2.5`.
pub fn prob_label(p: f64) -> String {
    let s = format!("{:.6}", p * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("p{s}")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_header(summary: &FilterSummary) -> String {
    let mut h = String::from("quarter,currency");
    for p in &summary.probs {
        h.push(',');
        h.push_str(&prob_label(*p));
    }
    h
}

fn summary_rows(summary: &FilterSummary, prefix: &str, out: &mut String) {
    for (t, q) in summary.quarters.iter().enumerate() {
        for (c, code) in summary.currencies.codes().iter().enumerate() {
            let _ = write!(out, "{prefix}{q},{code}");
            for v in &summary.quantiles[t][c] {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
}

/// `quarter,currency,p10,...` with one row per quarter and currency; the first quarter is the prior.
pub fn summary_csv(summary: &FilterSummary) -> String {
    let mut s = summary_header(summary);
    s.push('\n');
    summary_rows(summary, "", &mut s);
    s
}

/// `quarter,y_observed,y_predicted_median,sigma_obs,ess,alpha_clamped` per filtered quarter.
pub fn goodness_csv(summary: &FilterSummary) -> String {
    let mut s = String::from("quarter,y_observed,y_predicted_median,sigma_obs,ess,alpha_clamped\n");
    for t in 1..summary.quarters.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            summary.quarters[t],
            opt(summary.observed[t]),
            opt(summary.predicted_median[t]),
            opt(summary.sigma_obs[t]),
            opt(summary.ess[t]),
            summary.alpha_clamped[t]
        );
    }
    s
}

pub fn calibration_csv(points: &[CalibrationPoint]) -> String {
    let mut s = String::from("level,currency,coverage,n_reports\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{}", p.level, p.currency, p.coverage, p.n_reports);
    }
    s
}

pub fn equity_share_csv(series: &EquityShareSeries) -> String {
    let mut s = String::from("quarter,equity_share,degenerate\n");
    for ((q, x), d) in series.quarters.iter().zip(&series.x).zip(&series.degenerate) {
        let _ = writeln!(s, "{q},{x},{}", u8::from(*d));
    }
    s
}

pub fn baseline_csv(series: &BaselineSeries, codes: &[String]) -> String {
    let mut s = String::from("quarter,currency,share,nonunique,sse\n");
    for (t, q) in series.quarters.iter().enumerate() {
        for (c, code) in codes.iter().enumerate() {
            let _ = writeln!(
                s,
                "{q},{code},{},{},{}",
                series.shares[t].get(c),
                u8::from(series.nonunique[t]),
                series.sse[t]
            );
        }
    }
    s
}

/// Summaries stacked with leading `axis,value` columns, in the given order.
pub fn sweep_csv(axis: &str, points: &[(String, FilterSummary)]) -> Result<String> {
    let Some((_, first)) = points.first() else {
        return Err(Error::config("sweep", "no sweep values"));
    };
    let mut s = format!("axis,value,{}\n", summary_header(first));
    for (value, summary) in points {
        summary_rows(summary, &format!("{axis},{value},"), &mut s);
    }
    Ok(s)
}

/// Writes `dataset` in the input schemas under `dir` and returns the file paths.
///
/// Numbers are printed in shortest round-trip form, so loading the files back
/// reproduces every value exactly.
pub fn write_dataset(dataset: &CountryDataset, dir: &Path) -> Result<DataPaths> {
    let paths = DataPaths::in_dir(dir);
    let quarters = dataset.reserves.quarters();
    let codes = dataset.currencies.codes();
    let m = &dataset.market;

    let mut s = String::from("quarter,W,C\n");
    for ((q, w), c) in quarters.iter().zip(dataset.reserves.reserves()).zip(dataset.reserves.purchases()) {
        let _ = writeln!(s, "{q},{w},{c}");
    }
    write_text(&paths.reserves, &s)?;

    let per_currency = |header: &str, table: &[Vec<f64>]| {
        let mut s = format!("quarter,currency,{header}\n");
        for (q, row) in quarters.iter().zip(table) {
            for (code, v) in codes.iter().zip(row) {
                let _ = writeln!(s, "{q},{code},{v}");
            }
        }
        s
    };
    write_text(&paths.rates, &per_currency("e", &m.fx))?;
    write_text(&paths.equity, &per_currency("index_level", &m.equity))?;

    let mut s = String::from("quarter,currency,maturity_years,yield\n");
    for (mat, per) in &m.yields {
        for (t, q) in quarters.iter().enumerate() {
            for (code, series) in codes.iter().zip(per) {
                if let Some(y) = series {
                    let _ = writeln!(s, "{q},{code},{mat},{}", y[t]);
                }
            }
        }
    }
    write_text(&paths.yields, &s)?;

    let mut s = String::from("date,sdr_usd\n");
    for (d, v) in &m.daily_sdr {
        let _ = writeln!(s, "{},{v}", d.format("%Y-%m-%d"));
    }
    write_text(&paths.sdr, &s)?;

    let mut s = String::from("quarter,currency,share\n");
    for res in &dataset.cofer_residual {
        let q = res.quarter;
        for (code, v) in codes.iter().zip(&res.kept) {
            let _ = writeln!(s, "{q},{code},{v}");
        }
        if res.dropped > 0.0 {
            let _ = writeln!(s, "{q},OTHER,{}", res.dropped);
        }
    }
    write_text(&paths.cofer, &s)?;

    if !dataset.reported.is_empty() {
        let mut s = String::from("quarter,currency,share\n");
        for r in &dataset.reported {
            let _ = writeln!(s, "{},{},{}", r.quarter, codes[r.currency], r.share);
        }
        write_text(&paths.reported, &s)?;
    }
    Ok(paths)
}

/// Provenance written next to every output set.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    /// SHA-256 of every input file read, keyed by path.
    pub inputs: BTreeMap<String, String>,
}

impl RunMetadata {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, String>, inputs: &[PathBuf]) -> Result<Self> {
        let mut digests = BTreeMap::new();
        for p in inputs {
            if p.exists() {
                digests.insert(p.display().to_string(), file_digest(p)?);
            }
        }
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            inputs: digests,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))?;
        text.push('\n');
        write_text(path, &text)
    }
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let hash = Sha256::digest(&bytes);
    Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(prob_label(0.1), "p10");
        assert_eq!(prob_label(0.5), "p50");
        assert_eq!(prob_label(0.025), "p2.5");
        assert_eq!(prob_label(0.95), "p95");
        assert_eq!(prob_label(0.45), "p45");
    }

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            file_digest(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
