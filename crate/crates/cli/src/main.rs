use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kljn_core::attacks::{AttackKind, Channel, DecisionRule};
use kljn_core::channel::{classify_level, expected_mean_square, synthesize_wire, Resistor, Side};
use kljn_core::experiment::{
    comparisons_to_csv, oracle_comparison, published_check, random_state, run_sweep_with_threads,
    run_trial, ConfigPatch, ExperimentConfig, ReportFormat, TruthSpec,
};
use kljn_core::noise::{johnson_noise, johnson_rms, make_source_bank, MixingMode};
use kljn_core::presets::{self, TABLES};
use kljn_core::rng::{Purpose, StreamFactory};
use kljn_core::spectrum::welch;
use kljn_core::stats::skewness_kurtosis;
use kljn_core::KljnError;

const EXIT_USAGE: u8 = 1;
const EXIT_FAILURE: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(
    name = "kljn",
    version,
    about = "KLJN key exchange and RNG attack simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one Johnson-scaled noise record and summarize it.
    GenNoise(GenNoiseArgs),
    /// Simulate the wire of one bit-exchange period.
    Simulate(SimulateArgs),
    /// Run one attack on one trial and print the verdicts as JSON lines.
    Attack(AttackArgs),
    /// Run a Monte Carlo sweep over M and write the report.
    Sweep(SweepArgs),
    /// Reproduce the published tables.
    Tables(TablesArgs),
    /// Compare every simulated mean CCC with the closed-form oracle.
    Verify(VerifyArgs),
}

/// Keys shared by every subcommand; each overrides the config file.
#[derive(Args, Clone, Default)]
struct Common {
    /// Flat key-value config file (TOML) with experiment keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Low resistance, ohm.
    #[arg(long)]
    r_low: Option<f64>,
    /// High resistance, ohm.
    #[arg(long)]
    r_high: Option<f64>,
    /// Effective noise temperature, K.
    #[arg(long)]
    t_eff: Option<f64>,
    /// Noise bandwidth, Hz.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Raw series averaged per noise record.
    #[arg(long)]
    ensemble: Option<usize>,
}

impl Common {
    /// Config file keys, then flags, on top of `base`.
    fn resolve(
        &self,
        base: ExperimentConfig,
        extra: ConfigPatch,
    ) -> Result<ExperimentConfig, KljnError> {
        let mut cfg = base;
        if let Some(path) = &self.config {
            cfg = cfg.patched(&ConfigPatch::read(path)?);
        }
        let flags = ConfigPatch {
            master_seed: self.seed,
            r_low: self.r_low,
            r_high: self.r_high,
            t_eff: self.t_eff,
            bandwidth: self.bandwidth,
            ensemble: self.ensemble,
            ..extra
        };
        Ok(cfg.patched(&flags))
    }
}

#[derive(Args)]
struct GenNoiseArgs {
    /// Resistor whose Johnson level to use.
    #[arg(long, value_parser = parse_resistor)]
    resistor: Resistor,
    /// Number of samples.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Trace CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimulateArgs {
    /// LL, LH, HL, HH or random.
    #[arg(long, default_value = "LH")]
    state: TruthSpec,
    /// Samples in the period.
    #[arg(long)]
    steps: Option<usize>,
    /// Wire CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct AttackArgs {
    /// wire-bilateral, source-bilateral, wire-unilateral or source-unilateral.
    #[arg(long)]
    attack: Option<AttackKind>,
    /// LL, LH, HL, HH or random.
    #[arg(long)]
    state: Option<TruthSpec>,
    /// Mixing multiplier.
    #[arg(long, default_value_t = 0.0)]
    m: f64,
    /// Wire channel (wire attacks).
    #[arg(long, default_value = "voltage")]
    channel: Channel,
    /// johnson-scaled or unit-scaled.
    #[arg(long)]
    mode: Option<MixingMode>,
    /// level-gated or argmax.
    #[arg(long)]
    decision: Option<DecisionRule>,
    /// Trial index within the seed's stream space.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    /// Samples in the period.
    #[arg(long)]
    steps: Option<usize>,
    /// JSON-lines file to write instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    /// Start from a named preset (table1..table4).
    #[arg(long)]
    preset: Option<String>,
    /// wire-bilateral, source-bilateral, wire-unilateral or source-unilateral.
    #[arg(long)]
    attack: Option<AttackKind>,
    /// LL, LH, HL, HH or random.
    #[arg(long)]
    truth: Option<TruthSpec>,
    /// Comma-separated wire channels.
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<Channel>>,
    /// Comma-separated mixing multipliers.
    #[arg(long, value_delimiter = ',')]
    m_grid: Option<Vec<f64>>,
    /// johnson-scaled or unit-scaled.
    #[arg(long)]
    mode: Option<MixingMode>,
    /// level-gated or argmax.
    #[arg(long)]
    decision: Option<DecisionRule>,
    /// Trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    /// Samples per period.
    #[arg(long)]
    steps: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Report file; format from the extension unless --format is given.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<ReportFormat>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TablesArgs {
    /// 1, 2, 3, 4 or all.
    #[arg(long, default_value = "all")]
    which: String,
    /// Exit 3 unless every gated p is within 0.05 of the published value.
    #[arg(long)]
    check: bool,
    /// Trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for the tableN.csv reports.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// Sweep grid to verify; `default` runs the four table presets.
    #[arg(long, default_value = "default")]
    grid: String,
    /// Trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Comparison CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn parse_resistor(s: &str) -> Result<Resistor, String> {
    match s {
        "L" => Ok(Resistor::L),
        "H" => Ok(Resistor::H),
        _ => Err(format!("expected L or H, got '{s}'")),
    }
}

enum Failure {
    Error(KljnError),
    Check(String),
}

impl From<KljnError> for Failure {
    fn from(e: KljnError) -> Self {
        Failure::Error(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenNoise(a) => gen_noise(a),
        Command::Simulate(a) => simulate(a),
        Command::Attack(a) => attack(a),
        Command::Sweep(a) => sweep(a),
        Command::Tables(a) => tables(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: check failed: {msg}");
            ExitCode::from(EXIT_CHECK)
        }
    }
}

fn echo(cfg: &ExperimentConfig) {
    eprintln!("# resolved configuration");
    for line in cfg.to_toml_string().lines() {
        eprintln!("# {line}");
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), KljnError> {
    std::fs::write(path, text).map_err(|e| KljnError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn gen_noise(a: GenNoiseArgs) -> Outcome {
    let cfg = a.common.resolve(
        ExperimentConfig::default(),
        ConfigPatch {
            n_steps: Some(a.samples),
            ..Default::default()
        },
    )?;
    echo(&cfg);
    let params = cfg.params();
    params.validate()?;
    let r = params.resistance(a.resistor);
    let mut rng = StreamFactory::new(cfg.master_seed).stream(Purpose::Standalone, 0, 0);
    let trace = johnson_noise(r, &params, &mut rng)?.with_label(format!("R_{}", a.resistor));
    let (skew, kurt) = skewness_kurtosis(trace.samples());
    let flatness = if trace.len() >= 64 {
        let psd = welch(trace.samples(), trace.dt(), trace.len().min(1024));
        format!("{:.3}", psd.flatness_db(0.0, params.bandwidth))
    } else {
        "n/a".to_string()
    };
    println!(
        "samples={} rms_volts={:.6} johnson_rms_volts={:.6} skewness={:.5} excess_kurtosis={:.5} psd_flatness_db={}",
        trace.len(),
        trace.rms(),
        johnson_rms(r, &params)?,
        skew,
        kurt,
        flatness
    );
    if let Some(out) = a.out {
        trace.write_csv(&out)?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Outcome {
    let cfg = a.common.resolve(
        ExperimentConfig::default(),
        ConfigPatch {
            truth: Some(a.state),
            n_steps: a.steps,
            ..Default::default()
        },
    )?;
    echo(&cfg);
    let params = cfg.params();
    params.validate()?;
    let streams = StreamFactory::new(cfg.master_seed);
    let state = match cfg.truth {
        TruthSpec::Fixed(c) => c,
        TruthSpec::Random => random_state(&mut streams.stream(Purpose::Switch, 0, 0)),
    };
    let bank = make_source_bank(&params, &streams, 0)?;
    let (ra, rb) = state.resistances(&params);
    let wire = synthesize_wire(
        bank.get(Side::Alice, state.alice),
        bank.get(Side::Bob, state.bob),
        ra,
        rb,
    )?;
    let ms = wire.u_w.mean_square();
    println!(
        "state={state} mean_square_volts2={ms:.4} expected_volts2={:.4} level={}",
        expected_mean_square(ra, rb, &params)?,
        classify_level(ms, &params)?.as_str()
    );
    if let Some(out) = a.out {
        wire.write_csv(&out)?;
    }
    Ok(())
}

fn attack(a: AttackArgs) -> Outcome {
    let mut cfg = a.common.resolve(
        ExperimentConfig::default(),
        ConfigPatch {
            attack: a.attack,
            truth: a.state,
            mode: a.mode,
            decision: a.decision,
            n_steps: a.steps,
            ..Default::default()
        },
    )?;
    cfg.m_grid = vec![a.m];
    cfg.channels = if cfg.attack.is_wire() {
        vec![a.channel]
    } else {
        vec![Channel::Source]
    };
    cfg.n_trials = a.trial + 1;
    echo(&cfg);
    let outcome = run_trial(&cfg, a.trial)?;
    let mut text = String::new();
    for point in &outcome.points {
        for v in &point.verdicts {
            text.push_str(&v.to_json_line(point.m));
            text.push('\n');
        }
        if let Some(bob) = point.inferred_bob {
            let bob = bob
                .map(|r| format!("\"R_{r}\""))
                .unwrap_or_else(|| "null".into());
            text.push_str(&format!(
                "{{\"inferred_bob\":{bob},\"truth\":\"{}\",\"correct\":{}}}\n",
                outcome.truth, point.correct
            ));
        }
    }
    match a.out {
        Some(out) => write_text(&out, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Outcome {
    let base = match &a.preset {
        Some(name) => presets::preset(name)?,
        None => ExperimentConfig::default(),
    };
    let cfg = a.common.resolve(
        base,
        ConfigPatch {
            attack: a.attack,
            truth: a.truth,
            channels: a.channels,
            m_grid: a.m_grid,
            mode: a.mode,
            decision: a.decision,
            n_trials: a.trials,
            n_steps: a.steps,
            ..Default::default()
        },
    )?;
    echo(&cfg);
    let report = run_sweep_with_threads(&cfg, a.threads)?;
    let format = a
        .format
        .or_else(|| a.out.as_deref().map(ReportFormat::for_path))
        .unwrap_or(ReportFormat::Csv);
    match a.out {
        Some(out) => {
            report.export(format, &out)?;
            eprintln!("wrote {} rows to {}", report.rows.len(), out.display());
        }
        None => print!("{}", report.render(format)),
    }
    Ok(())
}

fn selected_tables(which: &str) -> Result<Vec<&'static presets::RefTable>, KljnError> {
    if which == "all" {
        return Ok(TABLES.iter().collect());
    }
    which
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<u8>()
                .ok()
                .and_then(presets::table)
                .ok_or_else(|| KljnError::InvalidArgument(format!("unknown table '{w}'")))
        })
        .collect()
}

fn tables(a: TablesArgs) -> Outcome {
    let selected = selected_tables(&a.which)?;
    let mut failures = Vec::new();
    for t in selected {
        let cfg = a.common.resolve(
            t.config(),
            ConfigPatch {
                n_trials: a.trials,
                ..Default::default()
            },
        )?;
        echo(&cfg);
        let report = run_sweep_with_threads(&cfg, a.threads)?;
        println!(
            "{} ({}, {} trials, seed {})",
            t.name, cfg.attack, cfg.n_trials, cfg.master_seed
        );
        println!(
            "  {:<8} {:>6} {:>10} {:>10}  result",
            "channel", "M", "published", "simulated"
        );
        for c in published_check(&report, t)? {
            let verdict = match (c.gated, c.within) {
                (true, true) => "PASS",
                (true, false) => "FAIL",
                (false, true) => "ok",
                (false, false) => "off",
            };
            println!(
                "  {:<8} {:>6} {:>10.3} {:>10.3}  {verdict}",
                c.channel.as_str(),
                c.m,
                c.published,
                c.simulated
            );
            if c.gated && !c.within {
                failures.push(format!("{} {} M={}", t.name, c.channel, c.m));
            }
        }
        if let Some(dir) = &a.out_dir {
            report.export(ReportFormat::Csv, &dir.join(format!("{}.csv", t.name)))?;
        }
    }
    if a.check && !failures.is_empty() {
        return Err(Failure::Check(format!(
            "p outside +/-0.05 at {}",
            failures.join(", ")
        )));
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Outcome {
    if a.grid != "default" {
        return Err(KljnError::InvalidArgument(format!("unknown grid '{}'", a.grid)).into());
    }
    let mut all = Vec::new();
    for t in &TABLES {
        let cfg = a.common.resolve(
            t.config(),
            ConfigPatch {
                n_trials: a.trials,
                ..Default::default()
            },
        )?;
        echo(&cfg);
        let report = run_sweep_with_threads(&cfg, a.threads)?;
        all.extend(oracle_comparison(&report)?);
    }
    let text = comparisons_to_csv(&all);
    match &a.out {
        Some(out) => write_text(out, &text)?,
        None => print!("{text}"),
    }
    let bad: Vec<_> = all
        .iter()
        .filter(|c| c.z.abs() > 3.0 || c.z.is_nan())
        .collect();
    let worst = all.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    eprintln!(
        "{} comparisons, {} with |z| > 3, max |z| = {worst:.2}",
        all.len(),
        bad.len()
    );
    if !bad.is_empty() {
        let list: Vec<String> = bad
            .iter()
            .map(|c| {
                format!(
                    "{} {} {} M={} z={:.2}",
                    c.knowledge, c.channel, c.probe, c.m, c.z
                )
            })
            .collect();
        return Err(Failure::Check(list.join("; ")));
    }
    Ok(())
}
