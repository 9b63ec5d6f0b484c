//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p kljn-core --test acceptance`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;

use kljn_core::attacks::{ccc, reconstruct_source, simulate_probe_wire, Channel};
use kljn_core::channel::{expected_mean_square, synthesize_wire, ResistorChoice, Side};
use kljn_core::experiment::{oracle_comparison, run_sweep_with_threads, SweepReport};
use kljn_core::noise::{
    antialias, eve_model, generate_unit_gaussian, johnson_noise, johnson_rms, make_source_bank,
    LengthPolicy, MixingMode,
};
use kljn_core::presets::{self, M_GRID};
use kljn_core::rng::{Purpose, StreamFactory};
use kljn_core::spectrum::{periodogram, welch};
use kljn_core::stats::{skewness_kurtosis, MeanAccumulator};
use kljn_core::SystemParams;

const P_TOL: f64 = 0.05;
const CCC_TOL: f64 = 0.01;
const POWER_HH_TOL: f64 = 0.015;
const Z_GATE: f64 = 3.0;
const ORDER_SE: f64 = 2.0;
const EXACT: f64 = 1e-12;
const RECON_REL: f64 = 1e-9;

const T1_P_U: [f64; 6] = [1.0, 1.0, 0.998, 0.904, 0.827, 0.558];
const T2_P: [f64; 6] = [1.0, 0.992, 0.669, 0.569, 0.547, 0.501];
const T3_P_U: [f64; 6] = [1.0, 1.0, 0.994, 0.886, 0.805, 0.539];
const T4_P: [f64; 6] = [1.0, 1.0, 0.999, 0.907, 0.804, 0.546];

type Check = Result<String, String>;

struct Reports {
    t1: SweepReport,
    t2: SweepReport,
    t3: SweepReport,
    t4: SweepReport,
}

fn run(name: &str, threads: usize) -> SweepReport {
    run_sweep_with_threads(&presets::preset(name).unwrap(), Some(threads)).unwrap()
}

fn mean(r: &SweepReport, m: f64, ch: Channel, probe: &str) -> f64 {
    r.row(m, ch, probe).unwrap().mean_ccc
}

fn p(r: &SweepReport, m: f64, ch: Channel) -> f64 {
    r.summary_at(m, ch).unwrap().p
}

fn near(what: &str, got: f64, want: f64, tol: f64, bad: &mut Vec<String>) {
    if !((got - want).abs() <= tol) {
        bad.push(format!("{what} = {got:.6}, want {want} +/- {tol}"));
    }
}

fn verdict(bad: Vec<String>, ok: String) -> Check {
    if bad.is_empty() {
        Ok(ok)
    } else {
        Err(bad.join("; "))
    }
}

fn p_grid(r: &SweepReport, ch: Channel, want: &[f64; 6], bad: &mut Vec<String>) -> String {
    let got: Vec<f64> = M_GRID.iter().map(|&m| p(r, m, ch)).collect();
    for ((&m, &g), &w) in M_GRID.iter().zip(&got).zip(want) {
        near(&format!("p({ch}) at M={m}"), g, w, P_TOL, bad);
    }
    format!("p = {got:?}")
}

fn criterion_1(r: &Reports) -> Check {
    let t = &r.t1;
    let mut bad = Vec::new();
    near(
        "CCC_u(LH)",
        mean(t, 0.0, Channel::Voltage, "LH"),
        1.0,
        EXACT,
        &mut bad,
    );
    near(
        "CCC_u(LL)",
        mean(t, 0.0, Channel::Voltage, "LL"),
        0.674,
        CCC_TOL,
        &mut bad,
    );
    near(
        "CCC_u(HH)",
        mean(t, 0.0, Channel::Voltage, "HH"),
        0.213,
        CCC_TOL,
        &mut bad,
    );
    near(
        "CCC_u(HL)",
        mean(t, 0.0, Channel::Voltage, "HL"),
        0.0,
        CCC_TOL,
        &mut bad,
    );
    near(
        "CCC_i(LH)",
        mean(t, 0.0, Channel::Current, "LH"),
        1.0,
        CCC_TOL,
        &mut bad,
    );
    near(
        "CCC_i(HH)",
        mean(t, 0.0, Channel::Current, "HH"),
        0.674,
        CCC_TOL,
        &mut bad,
    );
    near(
        "CCC_i(LL)",
        mean(t, 0.0, Channel::Current, "LL"),
        0.213,
        CCC_TOL,
        &mut bad,
    );
    near(
        "CCC_i(HL)",
        mean(t, 0.0, Channel::Current, "HL"),
        0.0,
        CCC_TOL,
        &mut bad,
    );
    near(
        "CCC_p(HH)",
        mean(t, 0.0, Channel::Power, "HH"),
        0.287,
        POWER_HH_TOL,
        &mut bad,
    );
    for ch in Channel::WIRE {
        if p(t, 0.0, ch) != 1.0 {
            bad.push(format!("p({ch}) at M=0 is {}", p(t, 0.0, ch)));
        }
    }
    verdict(
        bad,
        format!(
            "CCC_u LL/HH = {:.4}/{:.4}, CCC_p(HH) = {:.4}, p = 1 on all channels",
            mean(t, 0.0, Channel::Voltage, "LL"),
            mean(t, 0.0, Channel::Voltage, "HH"),
            mean(t, 0.0, Channel::Power, "HH")
        ),
    )
}

fn p_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn channel_order(r: &SweepReport, bad: &mut Vec<String>) {
    let n = r.config.n_trials;
    for &m in &M_GRID {
        let (u, i, w) = (
            p(r, m, Channel::Voltage),
            p(r, m, Channel::Current),
            p(r, m, Channel::Power),
        );
        let slack = |a: f64, b: f64| ORDER_SE * (p_se(a, n).powi(2) + p_se(b, n).powi(2)).sqrt();
        if u + slack(u, i) < i || i + slack(i, w) < w || u + slack(u, w) < w {
            bad.push(format!(
                "channel order broken at M={m}: p_u={u} p_i={i} p_p={w}"
            ));
        }
    }
}

fn oracle_gate(r: &SweepReport, bad: &mut Vec<String>) -> (usize, f64) {
    let cmp = oracle_comparison(r).unwrap();
    let mut worst: f64 = 0.0;
    for c in &cmp {
        worst = worst.max(c.z.abs());
        if !(c.z.abs() <= Z_GATE) {
            bad.push(format!(
                "{} {} M={}: z = {:.2}",
                c.channel, c.probe, c.m, c.z
            ));
        }
    }
    (cmp.len(), worst)
}

fn criterion_2(r: &Reports) -> Check {
    let mut bad = Vec::new();
    let ps = p_grid(&r.t1, Channel::Voltage, &T1_P_U, &mut bad);
    channel_order(&r.t1, &mut bad);
    let (n, worst) = oracle_gate(&r.t1, &mut bad);
    if n != 72 {
        bad.push(format!("{n} oracle comparisons, want 72"));
    }
    verdict(
        bad,
        format!("{ps}, {n} CCCs within 3 SE (max |z| = {worst:.2})"),
    )
}

fn criterion_3(r: &Reports) -> Check {
    let t = &r.t2;
    let mut bad = Vec::new();
    near(
        "CCC_LA(R_L) at M=0",
        mean(t, 0.0, Channel::Source, "alice:R_L"),
        1.0,
        EXACT,
        &mut bad,
    );
    let s0 = t.summary_at(0.0, Channel::Source).unwrap();
    if s0.p != 1.0 || s0.p_joint != 1.0 {
        bad.push(format!("M=0 p = {}, joint {}", s0.p, s0.p_joint));
    }
    let m1 = mean(t, 1.0, Channel::Source, "alice:R_L");
    near("CCC_LA(R_L) at M=1", m1, 0.0601, 0.006, &mut bad);
    let ps = p_grid(t, Channel::Source, &T2_P, &mut bad);
    verdict(bad, format!("CCC_LA(R_L) at M=1 = {m1:.4}, Bob-side {ps}"))
}

fn criterion_4(r: &Reports) -> Check {
    let t = &r.t3;
    let mut bad = Vec::new();
    let want = [("LH", 0.909), ("LL", 0.674), ("HH", 0.0), ("HL", 0.0)];
    for (probe, w) in want {
        near(
            &format!("CCC_u({probe})"),
            mean(t, 0.0, Channel::Voltage, probe),
            w,
            CCC_TOL,
            &mut bad,
        );
    }
    if p(t, 0.0, Channel::Voltage) != 1.0 {
        bad.push(format!("p_u at M=0 is {}", p(t, 0.0, Channel::Voltage)));
    }
    let ps = p_grid(t, Channel::Voltage, &T3_P_U, &mut bad);
    verdict(
        bad,
        format!(
            "CCC_u(LH) at M=0 = {:.4}, {ps}",
            mean(t, 0.0, Channel::Voltage, "LH")
        ),
    )
}

fn criterion_5(r: &Reports) -> Check {
    let t = &r.t4;
    let mut bad = Vec::new();
    let s0 = t.summary_at(0.0, Channel::Source).unwrap();
    if s0.p_alice != Some(1.0) || s0.p != 1.0 {
        bad.push(format!(
            "M=0: Alice p = {:?}, joint p = {}",
            s0.p_alice, s0.p
        ));
    }
    let inference = s0.p_inference.unwrap();
    if inference < 0.999 {
        bad.push(format!("R_B inference correct in {inference}"));
    }
    let ps = p_grid(t, Channel::Source, &T4_P, &mut bad);
    verdict(bad, format!("R_B inference {inference}, {ps}"))
}

fn criterion_6() -> Check {
    let params = SystemParams::default();
    let streams = StreamFactory::new(606);
    let mut bad = Vec::new();
    for trial in 0..20 {
        let bank = make_source_bank(&params, &streams, trial).unwrap();
        for truth in ResistorChoice::ALL {
            let (ra, rb) = truth.resistances(&params);
            let ua = bank.get(Side::Alice, truth.alice);
            let ub = bank.get(Side::Bob, truth.bob);
            let wire = synthesize_wire(ua, ub, ra, rb).unwrap();
            for (side, r, src) in [(Side::Alice, ra, ua), (Side::Bob, rb, ub)] {
                let rec = reconstruct_source(&wire, side, r).unwrap();
                let scale = src.rms();
                let err = rec
                    .samples()
                    .iter()
                    .zip(src.samples())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if err > RECON_REL * scale {
                    bad.push(format!("{truth} {side:?} reconstruction error {err:e}"));
                }
            }
            let eve = eve_model(
                &bank,
                0.0,
                MixingMode::JohnsonScaled,
                &params,
                &streams,
                trial,
            )
            .unwrap();
            let probe = simulate_probe_wire(&eve, truth, &params).unwrap();
            for (a, b) in [
                (&probe.u_w, &wire.u_w),
                (&probe.i_w, &wire.i_w),
                (&probe.p_w, &wire.p_w),
            ] {
                if a.samples() != b.samples() {
                    bad.push(format!(
                        "{truth} probe {} differs from the measured wire",
                        a.label()
                    ));
                }
            }
            let c = ccc(&wire.u_w, &wire.u_w).unwrap();
            if (c - 1.0).abs() > EXACT {
                bad.push(format!("CCC(x, x) = {c}"));
            }
        }
    }
    verdict(
        bad,
        "reconstruction, M=0 probe and CCC(x,x) identities hold on 20 trials x 4 states".into(),
    )
}

fn criterion_7() -> Check {
    let params = SystemParams::default();
    let streams = StreamFactory::new(707);
    let pinned = [
        (ResistorChoice::LL, 138.0),
        (ResistorChoice::LH, 250.9),
        (ResistorChoice::HL, 250.9),
        (ResistorChoice::HH, 1380.0),
    ];
    let trials = 1000u64;
    let mut acc: Vec<(MeanAccumulator, u64)> = vec![(MeanAccumulator::default(), 0); 4];
    for trial in 0..trials {
        let bank = make_source_bank(&params, &streams, trial).unwrap();
        for (k, (truth, _)) in pinned.iter().enumerate() {
            let (ra, rb) = truth.resistances(&params);
            let w = synthesize_wire(
                bank.get(Side::Alice, truth.alice),
                bank.get(Side::Bob, truth.bob),
                ra,
                rb,
            )
            .unwrap();
            let pw = w.p_w.samples();
            let n = pw.len() as f64;
            let m = w.p_w.mean();
            let sd = (pw.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            if m.abs() <= 3.0 * sd / n.sqrt() {
                acc[k].1 += 1;
            }
            acc[k].0.push(w.u_w.mean_square());
        }
    }
    let mut bad = Vec::new();
    let mut notes = Vec::new();
    for ((truth, level), (ms, zero_power)) in pinned.iter().zip(&acc) {
        let (ra, rb) = truth.resistances(&params);
        let exact = expected_mean_square(ra, rb, &params).unwrap();
        near(&format!("{truth} level"), exact, *level, 0.05, &mut bad);
        let se = ms.standard_error().unwrap();
        if (ms.mean() - exact).abs() > 3.0 * se {
            bad.push(format!(
                "{truth} mean square {:.3} vs {exact:.3} (SE {se:.3})",
                ms.mean()
            ));
        }
        let frac = *zero_power as f64 / trials as f64;
        if frac < 0.99 {
            bad.push(format!(
                "{truth} power mean within 3 sd/sqrt(n) in only {frac}"
            ));
        }
        notes.push(format!("{truth} {:.2} V^2, P_w ok {frac:.3}", ms.mean()));
    }
    verdict(bad, notes.join(", "))
}

fn criterion_8() -> Check {
    let n = 1usize << 20;
    let params = SystemParams {
        n_steps: n,
        ..Default::default()
    };
    let streams = StreamFactory::new(808);
    let mut bad = Vec::new();
    let mut notes = Vec::new();
    for (slot, (name, r, want)) in [("L", params.r_low, 16.613), ("H", params.r_high, 52.536)]
        .into_iter()
        .enumerate()
    {
        let t = johnson_noise(
            r,
            &params,
            &mut streams.stream(Purpose::Standalone, 0, slot as u32),
        )
        .unwrap();
        near(
            &format!("{name} Johnson RMS"),
            johnson_rms(r, &params).unwrap(),
            want,
            5e-4 * want,
            &mut bad,
        );
        near(
            &format!("{name} RMS"),
            t.rms(),
            want,
            0.005 * want,
            &mut bad,
        );
        let (skew, kurt) = skewness_kurtosis(t.samples());
        near(&format!("{name} skewness"), skew, 0.0, 0.01, &mut bad);
        near(
            &format!("{name} excess kurtosis"),
            kurt,
            0.0,
            0.05,
            &mut bad,
        );
        let flat = welch(t.samples(), t.dt(), 1024).flatness_db(0.0, params.bandwidth);
        near(
            &format!("{name} in-band flatness dB"),
            flat,
            0.0,
            1.0,
            &mut bad,
        );
        notes.push(format!(
            "{name}: rms {:.3}, skew {skew:.4}, kurt {kurt:.4}, flat {flat:.2} dB",
            t.rms()
        ));
    }
    let raw = generate_unit_gaussian(
        n,
        params.ensemble,
        params.time_step(),
        &mut streams.stream(Purpose::Standalone, 0, 2),
    )
    .unwrap();
    let wide = antialias(&raw, LengthPolicy::Strict).unwrap();
    let psd = periodogram(wide.samples(), wide.dt());
    let edge = 0.5 / raw.dt();
    let inside = psd.band_mean(0.0, edge);
    let outside = psd.band_mean(edge * 1.0001, f64::INFINITY);
    let rejection = 10.0 * (inside / outside.max(f64::MIN_POSITIVE)).log10();
    if !(rejection >= 40.0) {
        bad.push(format!("out-of-band rejection {rejection:.1} dB"));
    }
    notes.push(format!("rejection {:.0} dB", rejection.min(999.0)));
    verdict(bad, notes.join("; "))
}

fn criterion_9(r: &Reports) -> Check {
    let mut bad = Vec::new();
    for (name, one) in [
        ("table1", &r.t1),
        ("table2", &r.t2),
        ("table3", &r.t3),
        ("table4", &r.t4),
    ] {
        let again = run(name, 4);
        if one.to_csv_string() != again.to_csv_string()
            || one.to_json_string() != again.to_json_string()
        {
            bad.push(format!("{name} differs between 1 and 4 threads"));
        }
    }
    let repeat = run("table4", 1);
    if repeat.to_csv_string() != r.t4.to_csv_string() {
        bad.push("table4 differs between repeated runs".into());
    }
    verdict(
        bad,
        "CSV and JSON reports byte-identical across runs and 1/4 threads".into(),
    )
}

fn main() -> ExitCode {
    let reports = Reports {
        t1: run("table1", 1),
        t2: run("table2", 1),
        t3: run("table3", 1),
        t4: run("table4", 1),
    };
    let results = [
        ("table 1 anchor row", criterion_1(&reports)),
        ("table 1 sweep", criterion_2(&reports)),
        ("table 2 bilateral source attack", criterion_3(&reports)),
        ("table 3 unilateral wire attack", criterion_4(&reports)),
        ("table 4 unilateral source attack", criterion_5(&reports)),
        ("exact identities", criterion_6()),
        ("physics invariants", criterion_7()),
        ("noise quality", criterion_8()),
        ("determinism", criterion_9(&reports)),
    ];
    let mut failed = 0;
    for (k, (name, res)) in results.iter().enumerate() {
        match res {
            Ok(note) => println!("criterion {} PASS {name}: {note}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
