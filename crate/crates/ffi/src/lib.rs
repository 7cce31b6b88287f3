//! C ABI over `reservemix`.
//!
//! Objects cross the boundary as opaque handles created by `rm_*_new`/`load`
//! functions and released with the matching `rm_*_free`. Every fallible call
//! returns an [`RmStatus`]; on failure `rm_last_error` describes the problem
//! for the calling thread. Panics are caught and reported as `RM_PANIC`.

#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use reservemix::accounting::{drifted_shares, zero_coupon_quarterly_return};
use reservemix::io::{load_dataset, parse_config, summary_csv, CountryDataset, RunConfig};
use reservemix::particle_filter::FilterSummary;
use reservemix::state_model::{alpha_scale, obs_loglik, DirichletParams, ObsDistribution};
use reservemix::{Error, SimplexShares};

/// Result of every fallible call. Values 2 to 4 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmStatus {
    RmOk = 0,
    RmInvalidArgument = 1,
    RmConfig = 2,
    RmData = 3,
    RmNumerical = 4,
    RmIo = 5,
    RmPanic = 6,
}

/// Observation density selector for `rm_obs_loglik`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmDistribution {
    RmLaplace = 0,
    RmNormal = 1,
    RmCauchy = 2,
}

/// A parsed run configuration.
pub struct RmConfig(RunConfig);

/// Input data aligned for one configuration.
pub struct RmDataset(CountryDataset);

/// Filter output plus C copies of its currency codes.
pub struct RmSummary {
    summary: FilterSummary,
    codes: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> RmStatus {
    match err {
        Error::InvalidInput { .. } => RmStatus::RmInvalidArgument,
        Error::Io { .. } => RmStatus::RmIo,
        e => match e.exit_code() {
            2 => RmStatus::RmConfig,
            4 => RmStatus::RmNumerical,
            _ => RmStatus::RmData,
        },
    }
}

struct Fail(RmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn bad(msg: &str) -> Fail {
    Fail(RmStatus::RmInvalidArgument, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RmStatus::RmOk
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            RmStatus::RmPanic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(bad(&format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| bad(&format!("{name} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| bad(&format!("{name} is null")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() || n == 0 {
        return Err(bad(&format!("{name} is null or empty")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null.
///
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses config text; relative data paths resolve against `base_dir`.
#[no_mangle]
pub unsafe extern "C" fn rm_config_parse(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut RmConfig,
) -> RmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = parse_config(str_arg(text, "text")?, Path::new(str_arg(base_dir, "base_dir")?))?;
        *out = Box::into_raw(Box::new(RmConfig(cfg)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_config_from_file(path: *const c_char, out: *mut *mut RmConfig) -> RmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = RunConfig::from_file(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(RmConfig(cfg)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_config_set_seed(config: *mut RmConfig, seed: u64) -> RmStatus {
    guard(|| {
        out_arg(config, "config")?.0.seed = seed;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_config_set_particles(config: *mut RmConfig, n: usize) -> RmStatus {
    guard(|| {
        if n == 0 {
            return Err(Fail(RmStatus::RmConfig, "n_particles must be positive".into()));
        }
        out_arg(config, "config")?.0.n_particles = n;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_config_free(config: *mut RmConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Loads the files named by `config`.
#[no_mangle]
pub unsafe extern "C" fn rm_dataset_load(config: *const RmConfig, out: *mut *mut RmDataset) -> RmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = config.as_ref().ok_or_else(|| bad("config is null"))?;
        *out = Box::into_raw(Box::new(RmDataset(load_dataset(&cfg.0)?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_dataset_free(dataset: *mut RmDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Runs the filter. `threads == 0` uses every available core; results do not depend on it.
#[no_mangle]
pub unsafe extern "C" fn rm_estimate(
    config: *const RmConfig,
    dataset: *const RmDataset,
    threads: usize,
    out: *mut *mut RmSummary,
) -> RmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = config.as_ref().ok_or_else(|| bad("config is null"))?;
        let data = dataset.as_ref().ok_or_else(|| bad("dataset is null"))?;
        let run = || reservemix::pipeline::estimate(&cfg.0, &data.0);
        let (_, summary) = if threads == 0 {
            run()?
        } else {
            rayon_pool(threads)?.install(run)?
        };
        let codes = summary
            .currencies
            .codes()
            .iter()
            .map(|c| CString::new(c.as_str()).map_err(|_| bad("currency code contains NUL")))
            .collect::<Result<_, _>>()?;
        *out = Box::into_raw(Box::new(RmSummary { summary, codes }));
        Ok(())
    })
}

fn rayon_pool(threads: usize) -> Result<rayon::ThreadPool, Fail> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Fail(RmStatus::RmConfig, e.to_string()))
}

#[no_mangle]
pub unsafe extern "C" fn rm_summary_free(summary: *mut RmSummary) {
    if !summary.is_null() {
        drop(Box::from_raw(summary));
    }
}

/// Rows in the summary: the prior quarter plus every filtered quarter.
#[no_mangle]
pub unsafe extern "C" fn rm_summary_n_quarters(summary: *const RmSummary) -> usize {
    summary.as_ref().map_or(0, |s| s.summary.quarters.len())
}

#[no_mangle]
pub unsafe extern "C" fn rm_summary_n_currencies(summary: *const RmSummary) -> usize {
    summary.as_ref().map_or(0, |s| s.codes.len())
}

#[no_mangle]
pub unsafe extern "C" fn rm_summary_n_probs(summary: *const RmSummary) -> usize {
    summary.as_ref().map_or(0, |s| s.summary.probs.len())
}

/// Currency code `c`, valid while the summary lives; null when out of range.
#[no_mangle]
pub unsafe extern "C" fn rm_summary_currency(summary: *const RmSummary, c: usize) -> *const c_char {
    summary.as_ref().and_then(|s| s.codes.get(c)).map_or(ptr::null(), |c| c.as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn rm_summary_quarter(
    summary: *const RmSummary,
    t: usize,
    year: *mut i32,
    quarter: *mut u8,
) -> RmStatus {
    guard(|| {
        let s = summary.as_ref().ok_or_else(|| bad("summary is null"))?;
        let q = s.summary.quarters.get(t).ok_or_else(|| bad("quarter index out of range"))?;
        *out_arg(year, "year")? = q.year();
        *out_arg(quarter, "quarter")? = q.q();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_summary_prob(summary: *const RmSummary, k: usize, out: *mut f64) -> RmStatus {
    guard(|| {
        let s = summary.as_ref().ok_or_else(|| bad("summary is null"))?;
        *out_arg(out, "out")? = *s.summary.probs.get(k).ok_or_else(|| bad("probability index out of range"))?;
        Ok(())
    })
}

/// Quantile `k` of currency `c` at row `t`.
#[no_mangle]
pub unsafe extern "C" fn rm_summary_quantile(
    summary: *const RmSummary,
    t: usize,
    c: usize,
    k: usize,
    out: *mut f64,
) -> RmStatus {
    guard(|| {
        let s = summary.as_ref().ok_or_else(|| bad("summary is null"))?;
        let v = s
            .summary
            .quantiles
            .get(t)
            .and_then(|r| r.get(c))
            .and_then(|r| r.get(k))
            .ok_or_else(|| bad("index out of range"))?;
        *out_arg(out, "out")? = *v;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_summary_median(summary: *const RmSummary, t: usize, c: usize, out: *mut f64) -> RmStatus {
    guard(|| {
        let s = summary.as_ref().ok_or_else(|| bad("summary is null"))?;
        let v = s.summary.median.get(t).and_then(|r| r.get(c)).ok_or_else(|| bad("index out of range"))?;
        *out_arg(out, "out")? = *v;
        Ok(())
    })
}

/// Writes the summary in the CLI's `summary.csv` layout.
#[no_mangle]
pub unsafe extern "C" fn rm_summary_write_csv(summary: *const RmSummary, path: *const c_char) -> RmStatus {
    guard(|| {
        let s = summary.as_ref().ok_or_else(|| bad("summary is null"))?;
        let path = str_arg(path, "path")?;
        std::fs::write(path, summary_csv(&s.summary)).map_err(|e| Fail(RmStatus::RmIo, format!("{path}: {e}")))
    })
}

/// Dirichlet scale for a USD share, and whether it had to be clamped to `alpha_min`.
#[no_mangle]
pub unsafe extern "C" fn rm_alpha_scale(
    beta_usd: f64,
    gamma: f64,
    alpha_min: f64,
    alpha: *mut f64,
    clamped: *mut bool,
) -> RmStatus {
    guard(|| {
        let a = alpha_scale(beta_usd, gamma, alpha_min)?;
        *out_arg(alpha, "alpha")? = a.value;
        if let Some(c) = clamped.as_mut() {
            *c = a.clamped;
        }
        Ok(())
    })
}

/// Shares after one quarter of exchange-rate moves `fx_growth`, written to `out` (length `n`).
#[no_mangle]
pub unsafe extern "C" fn rm_drifted_shares(beta: *const f64, fx_growth: *const f64, n: usize, out: *mut f64) -> RmStatus {
    guard(|| {
        let b = SimplexShares::new(slice_arg(beta, n, "beta")?.to_vec())?;
        let d = drifted_shares(&b, slice_arg(fx_growth, n, "fx_growth")?)?;
        if out.is_null() {
            return Err(bad("out is null"));
        }
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(d.as_slice());
        Ok(())
    })
}

/// Quarterly return on a constant-maturity zero-coupon bond.
#[no_mangle]
pub unsafe extern "C" fn rm_zero_coupon_return(y_start: f64, y_end: f64, maturity_years: f64, out: *mut f64) -> RmStatus {
    guard(|| {
        *out_arg(out, "out")? = zero_coupon_quarterly_return(y_start, y_end, maturity_years)?;
        Ok(())
    })
}

/// Means and standard deviations of a Dirichlet with `n` parameters.
#[no_mangle]
pub unsafe extern "C" fn rm_dirichlet_moments(
    params: *const f64,
    n: usize,
    mean: *mut f64,
    std: *mut f64,
) -> RmStatus {
    guard(|| {
        let p = DirichletParams::new(slice_arg(params, n, "params")?.to_vec())?;
        if mean.is_null() || std.is_null() {
            return Err(bad("mean or std is null"));
        }
        let m = p.moments();
        std::slice::from_raw_parts_mut(mean, n).copy_from_slice(&m.mean);
        std::slice::from_raw_parts_mut(std, n).copy_from_slice(&m.std);
        Ok(())
    })
}

/// Log-density of `y` given prediction `mu` and scale `sigma`.
#[no_mangle]
pub unsafe extern "C" fn rm_obs_loglik(y: f64, mu: f64, sigma: f64, dist: RmDistribution, out: *mut f64) -> RmStatus {
    guard(|| {
        if !(sigma > 0.0) {
            return Err(bad("sigma must be positive"));
        }
        let d = match dist {
            RmDistribution::RmLaplace => ObsDistribution::Laplace,
            RmDistribution::RmNormal => ObsDistribution::Normal,
            RmDistribution::RmCauchy => ObsDistribution::Cauchy,
        };
        *out_arg(out, "out")? = obs_loglik(y, mu, sigma, d);
        Ok(())
    })
}
