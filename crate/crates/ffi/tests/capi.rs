use std::ffi::{CStr, CString};
use std::ptr;

use reservemix::synth::{generate, write_synth, SynthSpec};
use reservemix_ffi::*;

fn last_error() -> String {
    let p = rm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn synth_dir(n_quarters: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { n_quarters, seed: 5, ..SynthSpec::default() };
    write_synth(&generate(&spec).unwrap(), dir.path()).unwrap();
    dir
}

unsafe fn load(dir: &std::path::Path, particles: usize) -> (*mut RmConfig, *mut RmDataset) {
    let path = CString::new(dir.join("reservemix.cfg").to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(rm_config_from_file(path.as_ptr(), &mut cfg), RmStatus::RmOk);
    assert_eq!(rm_config_set_particles(cfg, particles), RmStatus::RmOk);
    let mut data = ptr::null_mut();
    assert_eq!(rm_dataset_load(cfg, &mut data), RmStatus::RmOk, "{}", last_error());
    (cfg, data)
}

unsafe fn medians(s: *const RmSummary) -> Vec<f64> {
    let mut v = Vec::new();
    for t in 0..rm_summary_n_quarters(s) {
        for c in 0..rm_summary_n_currencies(s) {
            let mut m = f64::NAN;
            assert_eq!(rm_summary_median(s, t, c, &mut m), RmStatus::RmOk);
            v.push(m);
        }
    }
    v
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(rm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn estimate_through_handles() {
    let dir = synth_dir(8);
    unsafe {
        let (cfg, data) = load(dir.path(), 500);
        let mut s = ptr::null_mut();
        assert_eq!(rm_estimate(cfg, data, 1, &mut s), RmStatus::RmOk, "{}", last_error());
        assert_eq!(rm_summary_n_quarters(s), 9);
        assert_eq!(rm_summary_n_currencies(s), 6);
        assert_eq!(CStr::from_ptr(rm_summary_currency(s, 0)).to_str().unwrap(), "USD");
        assert!(rm_summary_currency(s, 6).is_null());

        let (mut year, mut q) = (0, 0);
        assert_eq!(rm_summary_quarter(s, 0, &mut year, &mut q), RmStatus::RmOk);
        assert_eq!((year, q), (2003, 4));

        let mut total = 0.0;
        for c in 0..6 {
            let mut m = 0.0;
            rm_summary_median(s, 8, c, &mut m);
            assert!((0.0..=1.0).contains(&m));
            total += m;
        }
        assert!((total - 1.0).abs() < 0.1, "medians sum to {total}");

        for k in 1..rm_summary_n_probs(s) {
            let (mut p0, mut p1, mut lo, mut hi) = (0.0, 0.0, 0.0, 0.0);
            rm_summary_prob(s, k - 1, &mut p0);
            rm_summary_prob(s, k, &mut p1);
            rm_summary_quantile(s, 4, 0, k - 1, &mut lo);
            rm_summary_quantile(s, 4, 0, k, &mut hi);
            assert!(p0 < p1 && lo <= hi);
        }

        let mut x = 0.0;
        assert_eq!(rm_summary_quantile(s, 99, 0, 0, &mut x), RmStatus::RmInvalidArgument);

        let csv = dir.path().join("summary.csv");
        let csv_c = CString::new(csv.to_str().unwrap()).unwrap();
        assert_eq!(rm_summary_write_csv(s, csv_c.as_ptr()), RmStatus::RmOk);
        assert!(std::fs::read_to_string(&csv).unwrap().starts_with("quarter,"));

        rm_summary_free(s);
        rm_dataset_free(data);
        rm_config_free(cfg);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = synth_dir(6);
    unsafe {
        let (cfg, data) = load(dir.path(), 400);
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(rm_estimate(cfg, data, 1, &mut a), RmStatus::RmOk);
        assert_eq!(rm_estimate(cfg, data, 4, &mut b), RmStatus::RmOk);
        let (ma, mb) = (medians(a), medians(b));
        assert_eq!(ma.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), mb.iter().map(|v| v.to_bits()).collect::<Vec<_>>());

        assert_eq!(rm_config_set_seed(cfg, 99), RmStatus::RmOk);
        let mut c = ptr::null_mut();
        assert_eq!(rm_estimate(cfg, data, 1, &mut c), RmStatus::RmOk);
        assert_ne!(ma, medians(c));
        for s in [a, b, c] {
            rm_summary_free(s);
        }
        rm_dataset_free(data);
        rm_config_free(cfg);
    }
}

#[test]
fn config_errors_carry_status_and_message() {
    let text = CString::new("n_particles = many\n").unwrap();
    let base = CString::new(".").unwrap();
    let mut cfg = ptr::null_mut();
    let st = unsafe { rm_config_parse(text.as_ptr(), base.as_ptr(), &mut cfg) };
    assert_eq!(st, RmStatus::RmConfig);
    assert!(cfg.is_null());
    assert!(last_error().contains("n_particles"));

    let text = CString::new("seed = 3\n").unwrap();
    assert_eq!(unsafe { rm_config_parse(text.as_ptr(), base.as_ptr(), &mut cfg) }, RmStatus::RmOk);
    assert!(rm_last_error().is_null());
    assert_eq!(unsafe { rm_config_set_particles(cfg, 0) }, RmStatus::RmConfig);
    unsafe { rm_config_free(cfg) };
}

#[test]
fn missing_files_are_io_or_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let base = CString::new(dir.path().to_str().unwrap()).unwrap();
    let text = CString::new("seed = 1\n").unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(rm_config_parse(text.as_ptr(), base.as_ptr(), &mut cfg), RmStatus::RmOk);
        let mut data = ptr::null_mut();
        let st = rm_dataset_load(cfg, &mut data);
        assert!(matches!(st, RmStatus::RmIo | RmStatus::RmData), "{st:?}");
        assert!(data.is_null());
        assert!(last_error().contains("reserves"), "{}", last_error());
        rm_config_free(cfg);
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(rm_config_parse(ptr::null(), ptr::null(), &mut out), RmStatus::RmInvalidArgument);
        assert_eq!(rm_dataset_load(ptr::null(), ptr::null_mut()), RmStatus::RmInvalidArgument);
        assert_eq!(rm_estimate(ptr::null(), ptr::null(), 0, ptr::null_mut()), RmStatus::RmInvalidArgument);
        assert_eq!(rm_summary_n_quarters(ptr::null()), 0);
        assert!(rm_summary_currency(ptr::null(), 0).is_null());
        rm_config_free(ptr::null_mut());
        rm_dataset_free(ptr::null_mut());
        rm_summary_free(ptr::null_mut());
    }
}

#[test]
fn math_wrappers() {
    unsafe {
        let (mut a, mut clamped) = (0.0, true);
        assert_eq!(rm_alpha_scale(0.6, 0.015 * 0.015, 1.0, &mut a, &mut clamped), RmStatus::RmOk);
        assert!(!clamped);
        assert!((a - (0.6 - 0.36 - 0.000225) / 0.000225).abs() < 1e-9);
        assert_eq!(rm_alpha_scale(0.9999, 0.01, 1.0, &mut a, &mut clamped), RmStatus::RmOk);
        assert!(clamped && a == 1.0);

        let beta = [0.5, 0.5];
        let growth = [0.0, 0.1];
        let mut out = [0.0; 2];
        assert_eq!(rm_drifted_shares(beta.as_ptr(), growth.as_ptr(), 2, out.as_mut_ptr()), RmStatus::RmOk);
        assert!((out[0] - 0.5 / 1.05).abs() < 1e-12);
        assert!((out[0] + out[1] - 1.0).abs() < 1e-12);
        let bad = [0.7, 0.7];
        assert_eq!(rm_drifted_shares(bad.as_ptr(), growth.as_ptr(), 2, out.as_mut_ptr()), RmStatus::RmInvalidArgument);

        let mut r = f64::NAN;
        assert_eq!(rm_zero_coupon_return(0.03, 0.03, 7.0, &mut r), RmStatus::RmOk);
        assert!((r - (1.03f64.powf(0.25) - 1.0)).abs() < 1e-12, "{r}");

        let params = [2.0, 6.0];
        let (mut mean, mut std) = ([0.0; 2], [0.0; 2]);
        assert_eq!(rm_dirichlet_moments(params.as_ptr(), 2, mean.as_mut_ptr(), std.as_mut_ptr()), RmStatus::RmOk);
        assert!((mean[0] - 0.25).abs() < 1e-12);
        assert!((std[0] - (0.25f64 * 0.75 / 9.0).sqrt()).abs() < 1e-12);

        let mut ll = 0.0;
        assert_eq!(rm_obs_loglik(0.0, 0.0, 1.0, RmDistribution::RmLaplace, &mut ll), RmStatus::RmOk);
        assert!((ll + 2f64.ln()).abs() < 1e-12);
        assert_eq!(rm_obs_loglik(0.0, 0.0, 0.0, RmDistribution::RmNormal, &mut ll), RmStatus::RmInvalidArgument);
    }
}

#[test]
fn header_declares_every_export() {
    let root = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{root}/include/reservemix.h")).unwrap();
    let src = std::fs::read_to_string(format!("{root}/src/lib.rs")).unwrap();
    let exported: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 20);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for needle in ["typedef struct RmConfig RmConfig;", "RM_OK = 0", "RM_PANIC = 6", "RM_CAUCHY = 2"] {
        assert!(header.contains(needle), "{needle}");
    }
}
