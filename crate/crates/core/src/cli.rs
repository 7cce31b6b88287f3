//! Command-line front end. The binary only parses arguments and maps errors to exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::io::write::write_text;
use crate::io::{
    baseline_csv, calibration_csv, equity_share_csv, goodness_csv, load_dataset, load_reported, summary_csv,
    sweep_csv, RunConfig, RunMetadata,
};
use crate::particle_filter::FilterSummary;
use crate::pipeline::{self, SweepAxis};
use crate::state_model::ObsDistribution;
use crate::synth::{generate, write_synth, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "reservemix", version, about = "Estimate the currency shares of a reserve portfolio")]
pub struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter the dataset and write summary, goodness-of-fit and metadata files.
    Estimate,
    /// Re-run the filter across one sensitivity axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values; defaults depend on the axis.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Coverage of credible intervals against self-reported shares.
    Calibrate {
        /// Reported shares; defaults to the config's data.reported.
        #[arg(long)]
        reported: Option<PathBuf>,
    },
    /// Rolling least-squares shares on the simplex.
    Baseline,
    /// Fitted equity share per quarter.
    EquityShare,
    /// Write a synthetic dataset drawn from the model.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Maturity,
    PriorWidth,
    Distribution,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 75)]
    pub quarters: usize,
    #[arg(long, value_delimiter = ',', default_value = "USD,EUR,JPY,GBP,CAD,AUD")]
    pub currencies: Vec<String>,
    #[arg(long, default_value = "2004Q1")]
    pub start: String,
    #[arg(long, default_value = "laplace")]
    pub noise: String,
    #[arg(long, default_value_t = 0.004)]
    pub sigma_mean: f64,
    #[arg(long, default_value_t = 0.1)]
    pub equity_share: f64,
    #[arg(long, default_value_t = 4)]
    pub report_every: usize,
    #[arg(long, default_value_t = 0.05)]
    pub other_share: f64,
}

fn load_config(cli: &Cli) -> Result<(PathBuf, RunConfig)> {
    let path = cli.config.clone().ok_or_else(|| Error::config("--config", "required for this command"))?;
    let mut cfg = RunConfig::from_file(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok((path, cfg))
}

fn inputs(config_path: &Path, cfg: &RunConfig) -> Vec<PathBuf> {
    let d = &cfg.data;
    let mut v = vec![
        config_path.to_path_buf(),
        d.reserves.clone(),
        d.rates.clone(),
        d.yields.clone(),
        d.equity.clone(),
        d.sdr.clone(),
        d.cofer.clone(),
    ];
    if cfg.reported_required || d.reported.exists() {
        v.push(d.reported.clone());
    }
    v
}

fn metadata(cli: &Cli, command: &str, config_path: &Path, cfg: &RunConfig) -> Result<()> {
    RunMetadata::new(command, cfg.seed, cfg.echo(), &inputs(config_path, cfg))?.write(&cli.out_dir.join("metadata.json"))
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

/// Final-quarter medians and interquartile ranges, in percent.
pub fn final_quarter_table(summary: &FilterSummary) -> String {
    let t = summary.quarters.len() - 1;
    let mut s = format!("{}\ncurrency  median    p25    p75    iqr\n", summary.quarters[t]);
    for (c, code) in summary.currencies.codes().iter().enumerate() {
        let med = summary.median[t][c];
        match (summary.quantile(t, c, 0.25), summary.quantile(t, c, 0.75)) {
            (Some(lo), Some(hi)) => s.push_str(&format!(
                "{code:<8} {:>7} {:>6} {:>6} {:>6}\n",
                pct(med),
                pct(lo),
                pct(hi),
                pct(hi - lo)
            )),
            _ => s.push_str(&format!("{code:<8} {:>7}      -      -      -\n", pct(med))),
        }
    }
    s
}

fn sweep_axis(axis: Axis, values: &[String]) -> Result<SweepAxis> {
    let nums = |default: &[f64]| -> Result<Vec<f64>> {
        if values.is_empty() {
            return Ok(default.to_vec());
        }
        values
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::config("--values", format!("`{v}` is not a number"))))
            .collect()
    };
    Ok(match axis {
        Axis::Maturity => SweepAxis::Maturity(nums(&[2.0, 5.0, 7.0, 10.0])?),
        Axis::PriorWidth => SweepAxis::PriorWidth(nums(&[0.5, 1.0, 2.0])?),
        Axis::Distribution => {
            let names: Vec<String> = if values.is_empty() {
                vec!["laplace".into(), "normal".into(), "cauchy".into()]
            } else {
                values.to_vec()
            };
            SweepAxis::Distribution(names.iter().map(|n| n.parse::<ObsDistribution>()).collect::<Result<_>>()?)
        }
    })
}

/// Runs one parsed command line, writing progress text to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::config("--threads", e.to_string()))?;
            let text = pool.install(|| dispatch(cli))?;
            say(out, &text)
        }
        None => say(out, &dispatch(cli)?),
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn dispatch(cli: &Cli) -> Result<String> {
    let dir = &cli.out_dir;
    match &cli.command {
        Command::Estimate => {
            let (path, cfg) = load_config(cli)?;
            let data = load_dataset(&cfg)?;
            let (_, summary) = pipeline::estimate(&cfg, &data)?;
            write_text(&dir.join("summary.csv"), &summary_csv(&summary))?;
            write_text(&dir.join("goodness.csv"), &goodness_csv(&summary))?;
            metadata(cli, "estimate", &path, &cfg)?;
            Ok(final_quarter_table(&summary))
        }
        Command::Sweep { axis, values } => {
            let (path, cfg) = load_config(cli)?;
            let data = load_dataset(&cfg)?;
            let axis = sweep_axis(*axis, values)?;
            let points = pipeline::sweep(&cfg, &data, &axis)?;
            write_text(&dir.join("sweep_summary.csv"), &sweep_csv(axis.name(), &points)?)?;
            metadata(cli, &format!("sweep {}", axis.name()), &path, &cfg)?;
            Ok(points
                .iter()
                .map(|(label, s)| format!("{} = {label}\n{}", axis.name(), final_quarter_table(s)))
                .collect())
        }
        Command::Calibrate { reported } => {
            let (path, mut cfg) = load_config(cli)?;
            if let Some(r) = reported {
                cfg.data.reported = r.clone();
                cfg.reported_required = true;
            }
            let mut data = load_dataset(&cfg)?;
            if reported.is_some() {
                data.reported = load_reported(&cfg.data.reported, &data.currencies)?;
            }
            let (_, curve) = pipeline::calibrate(&cfg, &data)?;
            write_text(&dir.join("calibration.csv"), &calibration_csv(&curve))?;
            metadata(cli, "calibrate", &path, &cfg)?;
            Ok(calibration_csv(&curve))
        }
        Command::Baseline => {
            let (path, cfg) = load_config(cli)?;
            let data = load_dataset(&cfg)?;
            let series = pipeline::baseline(&cfg, &data)?;
            write_text(&dir.join("baseline.csv"), &baseline_csv(&series, data.currencies.codes()))?;
            metadata(cli, "baseline", &path, &cfg)?;
            let flagged = series.nonunique.iter().filter(|f| **f).count();
            Ok(format!("{} windows, {flagged} with non-unique solutions\n", series.quarters.len()))
        }
        Command::EquityShare => {
            let (path, cfg) = load_config(cli)?;
            let data = load_dataset(&cfg)?;
            let prepared = pipeline::prepare(&cfg, &data)?;
            write_text(&dir.join("equity_share.csv"), &equity_share_csv(&prepared.equity))?;
            metadata(cli, "equity-share", &path, &cfg)?;
            let mean = crate::stats::mean(&prepared.equity.x);
            Ok(format!("mean equity share {}%\n", pct(mean)))
        }
        Command::Synth(a) => {
            let spec = SynthSpec {
                currencies: a.currencies.iter().map(|c| c.trim().to_ascii_uppercase()).collect(),
                start: a.start.parse().map_err(|_| Error::config("--start", format!("bad quarter `{}`", a.start)))?,
                n_quarters: a.quarters,
                seed: cli.seed.unwrap_or(0),
                noise: a.noise.parse()?,
                sigma_mean: a.sigma_mean,
                equity_share: a.equity_share,
                report_every: a.report_every,
                other_share: a.other_share,
                ..SynthSpec::default()
            };
            let synth = generate(&spec)?;
            let cfg_path = write_synth(&synth, dir)?;
            Ok(format!("wrote {}\n", cfg_path.display()))
        }
    }
}
