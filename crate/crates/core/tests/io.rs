use std::fs;
use std::path::Path;

use proptest::prelude::*;

use reservemix::accounting::Quarter;
use reservemix::io::{load_dataset, parse_config, write_dataset, RunConfig};
use reservemix::synth::{generate, write_synth, SynthSpec};
use reservemix::Error;

fn synth_in(dir: &Path, spec: SynthSpec) -> RunConfig {
    let path = write_synth(&generate(&spec).unwrap(), dir).unwrap();
    RunConfig::from_file(&path).unwrap()
}

fn edit(path: &Path, keep: impl Fn(&str) -> bool) {
    let text = fs::read_to_string(path).unwrap();
    let kept: Vec<&str> = text.lines().enumerate().filter(|(i, l)| *i == 0 || keep(l)).map(|(_, l)| l).collect();
    fs::write(path, kept.join("\n") + "\n").unwrap();
}

fn q(s: &str) -> Quarter {
    s.parse().unwrap()
}

#[test]
fn three_quarter_panel_loads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_in(dir.path(), SynthSpec { n_quarters: 2, ..SynthSpec::default() });
    let ds = load_dataset(&cfg).unwrap();
    assert_eq!(ds.reserves.quarters(), &[q("2003Q4"), q("2004Q1"), q("2004Q2")]);
    assert_eq!(ds.market.quarters.len(), 3);
    assert_eq!(ds.cofer.quarters(), &[q("2003Q4"), q("2004Q1")]);
    assert_eq!(ds.currencies.codes()[0], "USD");
    assert!(ds.market.fx.iter().all(|row| row[0] == 1.0));
}

#[test]
fn missing_rate_row_names_quarter_and_currency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_in(dir.path(), SynthSpec { n_quarters: 6, ..SynthSpec::default() });
    edit(&cfg.data.rates, |l| !l.starts_with("2004Q3,EUR"));
    match load_dataset(&cfg).unwrap_err() {
        Error::Gap { quarter, currency, .. } => {
            assert_eq!(quarter, q("2004Q3"));
            assert_eq!(currency.as_deref(), Some("EUR"));
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn missing_reserve_quarter_is_a_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_in(dir.path(), SynthSpec { n_quarters: 6, ..SynthSpec::default() });
    edit(&cfg.data.reserves, |l| !l.starts_with("2004Q2"));
    let err = load_dataset(&cfg).unwrap_err();
    assert!(err.to_string().contains("2004Q2"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn cofer_residual_is_renormalized() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_in(dir.path(), SynthSpec { n_quarters: 4, other_share: 0.05, ..SynthSpec::default() });
    let text = fs::read_to_string(&cfg.data.cofer).unwrap();
    assert!(text.lines().any(|l| l.contains(",OTHER,0.05")));
    let ds = load_dataset(&cfg).unwrap();
    for (s, r) in ds.cofer.shares().iter().zip(&ds.cofer_residual) {
        assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r.factor - 1.0 / 0.95).abs() < 1e-9, "{}", r.factor);
    }
}

#[test]
fn absent_maturity_names_the_currency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_in(dir.path(), SynthSpec { n_quarters: 4, ..SynthSpec::default() });
    edit(&cfg.data.yields, |l| !(l.contains(",JPY,") && l.contains(",7,")));
    let ds = load_dataset(&cfg).unwrap();
    let err = reservemix::pipeline::prepare(&cfg, &ds).unwrap_err();
    assert!(matches!(err, Error::Config { .. }), "{err}");
    assert!(err.to_string().contains("JPY"), "{err}");
}

#[test]
fn fallback_return_covers_missing_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = synth_in(dir.path(), SynthSpec { n_quarters: 4, ..SynthSpec::default() });
    edit(&cfg.data.yields, |l| !l.contains(",JPY,"));
    cfg.fallback_return.insert("JPY".into(), 0.001);
    let ds = load_dataset(&cfg).unwrap();
    let (prepared, _) = reservemix::pipeline::estimate(&RunConfig { n_particles: 200, ..cfg }, &ds).unwrap();
    let jpy = prepared.currencies.index_of("JPY").unwrap();
    assert!((0..prepared.returns.len()).all(|t| prepared.returns.row(t).bond[jpy] == 0.001));
}

#[test]
fn config_errors_name_the_field() {
    let base = Path::new("/data");
    for (text, field) in [
        ("n_particles = -3", "n_particles"),
        ("bogus_key = 1", "bogus_key"),
        ("seed = 1\nseed = 2", "seed"),
        ("obs_dist = student", "obs_dist"),
        ("start = 2004Q9", "start"),
    ] {
        match parse_config(text, base).unwrap_err() {
            Error::Config { field: f, .. } => assert_eq!(f, field, "{text}"),
            e => panic!("{text}: {e}"),
        }
    }
    let cfg = parse_config("data.reserves = res.csv\n", base).unwrap();
    assert_eq!(cfg.data.reserves, base.join("res.csv"));
}

#[test]
fn restrict_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_in(dir.path(), SynthSpec { n_quarters: 10, ..SynthSpec::default() });
    let ds = load_dataset(&cfg).unwrap();
    let once = ds.restrict(q("2004Q3"), q("2005Q2")).unwrap();
    assert_eq!(once.reserves.quarters().first(), Some(&q("2004Q2")));
    assert_eq!(once.reserves.len(), 5);
    assert_eq!(once.restrict(q("2004Q3"), q("2005Q2")).unwrap(), once);
    assert!(ds.restrict(q("2003Q1"), q("2004Q2")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn written_datasets_read_back_unchanged(seed in 0u64..1000, n in 2usize..12, other in 0.0f64..0.2) {
        let spec = SynthSpec { seed, n_quarters: n, other_share: other, ..SynthSpec::default() };
        let synth = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = write_synth(&synth, dir.path()).unwrap();
        let cfg = RunConfig::from_file(&cfg_path).unwrap();
        let loaded = load_dataset(&cfg).unwrap();
        prop_assert_eq!(&loaded, &synth.dataset);

        let again = tempfile::tempdir().unwrap();
        write_dataset(&loaded, again.path()).unwrap();
        for f in ["reserves.csv", "rates.csv", "yields.csv", "equity.csv", "sdr.csv", "cofer.csv", "reported.csv"] {
            prop_assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(again.path().join(f)).unwrap(), "{}", f);
        }
    }
}
