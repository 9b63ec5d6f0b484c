//! The checked-in expected-value files against the bundled numbers and the oracle.
//!
//! `KLJN_BLESS=1 cargo test -p kljn-core --test presets` rewrites them.

use std::path::PathBuf;

use kljn_core::experiment::{oracle_comparison, run_sweep, ExperimentConfig};
use kljn_core::presets::{expected_values_csv, preset, TABLES};

fn expected_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join(format!("{name}.expected.csv"))
}

#[test]
fn expected_files_are_current() {
    for t in &TABLES {
        let fresh = expected_values_csv(t).unwrap();
        let path = expected_path(t.name);
        if std::env::var_os("KLJN_BLESS").is_some() {
            std::fs::write(&path, &fresh).unwrap();
        }
        let on_disk = std::fs::read_to_string(&path).unwrap();
        assert_eq!(on_disk, fresh, "{} is stale", path.display());
    }
}

#[test]
fn expected_files_carry_one_line_per_report_row() {
    for t in &TABLES {
        let cfg = t.config();
        let rows = cfg.m_grid.len() * cfg.probes().len() * cfg.effective_channels().len();
        let text = std::fs::read_to_string(expected_path(t.name)).unwrap();
        let data = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
        assert_eq!(data, rows, "{}", t.name);
    }
}

#[test]
fn oracle_column_matches_a_small_sweep_row_layout() {
    // The oracle column follows report row order, so a short run lines up.
    let mut cfg: ExperimentConfig = preset("table3").unwrap();
    cfg.n_trials = 3;
    let report = run_sweep(&cfg).unwrap();
    let cmp = oracle_comparison(&report).unwrap();
    let text = std::fs::read_to_string(expected_path("table3")).unwrap();
    for (line, c) in text.lines().skip(2).zip(&cmp) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], c.channel.as_str());
        assert_eq!(f[2], c.probe);
        let oracle: f64 = f[4].parse().unwrap();
        // six significant digits
        assert!((oracle - c.predicted).abs() <= 5e-6 * c.predicted.abs() + 1e-12);
    }
}
