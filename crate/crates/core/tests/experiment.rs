//! Sweep harness: report layout, serialization and the statistical trends.

use kljn_core::attacks::{Channel, Hypothesis};
use kljn_core::channel::Resistor;
use kljn_core::experiment::{
    run_sweep, run_trial, ConfigPatch, ExperimentConfig, ReportFormat, SweepReport,
};
use kljn_core::presets::{preset, PRESET_NAMES};
use kljn_core::KljnError;

fn shortened(name: &str, trials: u64) -> ExperimentConfig {
    preset(name).unwrap().patched(&ConfigPatch {
        n_trials: Some(trials),
        ..Default::default()
    })
}

#[test]
fn table1_report_has_72_rows() {
    let r = run_sweep(&shortened("table1", 5)).unwrap();
    assert_eq!(r.rows.len(), 6 * 4 * 3);
    let csv = r.to_csv_string();
    let data = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(data, 72);
}

#[test]
fn row_count_matches_layout_for_every_preset() {
    for name in PRESET_NAMES {
        let cfg = shortened(name, 3);
        let r = run_sweep(&cfg).unwrap();
        let want = cfg.m_grid.len() * cfg.probes().len() * cfg.effective_channels().len();
        assert_eq!(r.rows.len(), want, "{name}");
        assert_eq!(
            r.summary.len(),
            cfg.m_grid.len() * cfg.effective_channels().len()
        );
    }
}

#[test]
fn csv_round_trips_at_printed_precision() {
    for name in PRESET_NAMES {
        let r = run_sweep(&shortened(name, 7)).unwrap();
        let back = SweepReport::rows_from_csv_str(&r.to_csv_string()).unwrap();
        assert_eq!(back, r.rounded().rows, "{name}");
    }
}

#[test]
fn json_echo_reruns_the_sweep() {
    let r = run_sweep(&shortened("table2", 9)).unwrap();
    let json = r.to_json_string();
    let parsed = SweepReport::from_json_str(&json).unwrap();
    assert_eq!(parsed, r.rounded());
    let again = run_sweep(&parsed.config).unwrap();
    assert_eq!(again.to_json_string(), json);
    assert!(json.contains("\"master_seed\": 42"));
    assert!(json.contains("\"scoring\""));
}

#[test]
fn export_writes_files_and_reports_bad_paths() {
    let r = run_sweep(&shortened("table4", 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t4.csv");
    r.export(ReportFormat::for_path(&csv), &csv).unwrap();
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), r.to_csv_string());
    let json = dir.path().join("t4.json");
    r.export(ReportFormat::for_path(&json), &json).unwrap();
    assert_eq!(std::fs::read_to_string(&json).unwrap(), r.to_json_string());
    let bad = dir.path().join("missing").join("t4.csv");
    match r.export(ReportFormat::Csv, &bad) {
        Err(KljnError::Io { path, .. }) => assert_eq!(path, bad),
        other => panic!("expected an i/o error, got {other:?}"),
    }
}

#[test]
fn single_trial_presets_have_binary_p_and_no_se() {
    for name in PRESET_NAMES {
        let r = run_sweep(&shortened(name, 1)).unwrap();
        assert!(r.rows.iter().all(|row| row.se_ccc.is_none()), "{name}");
        assert!(
            r.rows.iter().all(|row| row.p == 0.0 || row.p == 1.0),
            "{name}"
        );
        let csv = r.to_csv_string();
        assert!(csv.lines().skip(5).all(|l| l.split(',').nth(8) == Some("")));
    }
}

#[test]
fn m0_trials_match_the_published_outcomes() {
    let t1 = shortened("table1", 50);
    for k in [0, 17, 49] {
        let t = run_trial(&t1, k).unwrap();
        let voltage = &t.points[0];
        assert_eq!((voltage.m, voltage.channel), (0.0, Channel::Voltage));
        assert!(voltage.correct);
    }
    let t4 = shortened("table4", 50);
    for k in [0, 23] {
        let t = run_trial(&t4, k).unwrap();
        let p = &t.points[0];
        assert_eq!(p.verdicts[0].guess, Hypothesis::Holds(Resistor::L));
        assert_eq!(p.inferred_bob, Some(Some(Resistor::H)));
    }
}

#[test]
fn disjoint_probe_stays_near_zero() {
    let cfg = shortened("table1", 300);
    let n = cfg.n_steps as f64;
    let mut inside = 0usize;
    let mut total = 0usize;
    for k in 0..cfg.n_trials {
        for p in run_trial(&cfg, k).unwrap().points {
            let hl = p.verdicts[0]
                .score(Hypothesis::Combo(kljn_core::channel::ResistorChoice::HL))
                .unwrap();
            total += 1;
            inside += (hl.abs() <= 3.0 / n.sqrt()) as usize;
        }
    }
    assert!(inside as f64 >= 0.99 * total as f64, "{inside} of {total}");
}

/// True-combo mean CCC and p may not rise with M beyond two standard errors.
#[test]
fn scores_and_p_fall_with_m() {
    for name in PRESET_NAMES {
        let cfg = shortened(name, 300);
        let r = run_sweep(&cfg).unwrap();
        let truth_probe = if cfg.attack.is_wire() {
            "LH"
        } else {
            "alice:R_L"
        };
        for ch in cfg.effective_channels() {
            let rows: Vec<_> = cfg
                .m_grid
                .iter()
                .map(|&m| r.row(m, ch, truth_probe).unwrap())
                .collect();
            for w in rows.windows(2) {
                let se = w[0].se_ccc.unwrap().hypot(w[1].se_ccc.unwrap());
                assert!(
                    w[1].mean_ccc <= w[0].mean_ccc + 2.0 * se,
                    "{name} {ch} M={}",
                    w[1].m
                );
            }
            let ps: Vec<f64> = cfg
                .m_grid
                .iter()
                .map(|&m| r.summary_at(m, ch).unwrap().p)
                .collect();
            let n = cfg.n_trials as f64;
            let se = |p: f64| (p * (1.0 - p) / n).sqrt();
            for w in ps.windows(2) {
                assert!(
                    w[1] <= w[0] + 2.0 * se(w[0]).hypot(se(w[1])),
                    "{name} {ch} p {ps:?}"
                );
            }
        }
    }
}

#[test]
fn bilateral_m0_is_calibrated() {
    for name in ["table1", "table2"] {
        let r = run_sweep(&shortened(name, 100)).unwrap();
        for s in r.summary.iter().filter(|s| s.m == 0.0) {
            assert_eq!(s.p, 1.0, "{name} {}", s.channel);
            assert_eq!(s.p_joint, 1.0);
        }
    }
}
