//! Seeded Monte Carlo sweeps over the mixing multiplier, their reports and
//! the oracle comparison.
//!
//! A trial draws every random quantity from streams keyed by
//! `(master_seed, trial index)`, so trials run in any order on any number of
//! threads. Aggregation walks the finished trials in index order.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{
    bilateral_source_attack, bilateral_wire_attack, unilateral_source_attack,
    unilateral_wire_attack, AttackKind, AttackVerdict, Channel, DecisionRule, Hypothesis,
    Knowledge,
};
use crate::channel::{synthesize_wire, Resistor, ResistorChoice, Side};
use crate::error::{KljnError, Result};
use crate::noise::{make_source_bank, unit_bank, EveModel, MixingMode};
use crate::oracle::{predict_ccc, predict_source_ccc};
use crate::params::SystemParams;
use crate::rng::{Purpose, StreamFactory, MAX_TRIAL};
use crate::stats::MeanAccumulator;

/// Longest accepted M grid; keeps tie-break slots inside the stream key space.
pub const MAX_GRID: usize = 1000;

/// The resistor state during the attacked period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthSpec {
    Fixed(ResistorChoice),
    /// Drawn per trial from the switch stream.
    Random,
}

impl std::fmt::Display for TruthSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TruthSpec::Fixed(c) => write!(f, "{c}"),
            TruthSpec::Random => f.write_str("random"),
        }
    }
}

impl std::str::FromStr for TruthSpec {
    type Err = KljnError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "random" {
            Ok(TruthSpec::Random)
        } else {
            s.parse().map(TruthSpec::Fixed)
        }
    }
}

impl Serialize for TruthSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TruthSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Uniform draw of both parties' switches.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R) -> ResistorChoice {
    let mut side = || {
        if rng.random::<bool>() {
            Resistor::H
        } else {
            Resistor::L
        }
    };
    let alice = side();
    let bob = side();
    ResistorChoice::new(alice, bob)
}

/// One sweep, flat so that a config file and a report header carry the same
/// keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub attack: AttackKind,
    pub truth: TruthSpec,
    /// Wire channels to attack; source attacks always use `source`.
    pub channels: Vec<Channel>,
    pub m_grid: Vec<f64>,
    pub mode: MixingMode,
    pub decision: DecisionRule,
    pub n_trials: u64,
    pub master_seed: u64,
    pub r_low: f64,
    pub r_high: f64,
    pub t_eff: f64,
    pub bandwidth: f64,
    pub boltzmann: f64,
    pub n_steps: usize,
    pub ensemble: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::with_params(SystemParams::default())
    }
}

impl ExperimentConfig {
    /// Bilateral wire attack on LH over the standard grid.
    pub fn with_params(p: SystemParams) -> Self {
        ExperimentConfig {
            attack: AttackKind::WireBilateral,
            truth: TruthSpec::Fixed(ResistorChoice::LH),
            channels: Channel::WIRE.to_vec(),
            m_grid: crate::presets::M_GRID.to_vec(),
            mode: MixingMode::JohnsonScaled,
            decision: DecisionRule::LevelGated,
            n_trials: 1000,
            master_seed: 42,
            r_low: p.r_low,
            r_high: p.r_high,
            t_eff: p.t_eff,
            bandwidth: p.bandwidth,
            boltzmann: p.boltzmann,
            n_steps: p.n_steps,
            ensemble: p.ensemble,
        }
    }

    pub fn params(&self) -> SystemParams {
        SystemParams {
            r_low: self.r_low,
            r_high: self.r_high,
            t_eff: self.t_eff,
            bandwidth: self.bandwidth,
            boltzmann: self.boltzmann,
            n_steps: self.n_steps,
            ensemble: self.ensemble,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if self.n_trials == 0 {
            return Err(KljnError::invalid("n_trials must be >= 1"));
        }
        if self.n_trials - 1 > MAX_TRIAL {
            return Err(KljnError::invalid(format!(
                "n_trials must be <= {}",
                MAX_TRIAL + 1
            )));
        }
        if self.m_grid.is_empty() {
            return Err(KljnError::invalid("m_grid must not be empty"));
        }
        if self.m_grid.len() > MAX_GRID {
            return Err(KljnError::invalid(format!(
                "m_grid holds at most {MAX_GRID} values"
            )));
        }
        if let Some(m) = self.m_grid.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(KljnError::invalid(format!(
                "M must be finite and >= 0, got {m}"
            )));
        }
        if self.attack.is_wire() {
            if self.channels.is_empty() {
                return Err(KljnError::invalid("wire attacks need at least one channel"));
            }
            for (k, ch) in self.channels.iter().enumerate() {
                if *ch == Channel::Source {
                    return Err(KljnError::invalid("'source' is not a wire channel"));
                }
                if self.channels[..k].contains(ch) {
                    return Err(KljnError::invalid(format!("channel '{ch}' listed twice")));
                }
            }
        } else if self.channels.iter().any(|c| *c != Channel::Source) {
            return Err(KljnError::invalid(format!(
                "{} attacks only use the 'source' channel",
                self.attack
            )));
        }
        Ok(())
    }

    /// Channels actually attacked, in report order.
    pub fn effective_channels(&self) -> Vec<Channel> {
        if self.attack.is_wire() {
            self.channels.clone()
        } else {
            vec![Channel::Source]
        }
    }

    /// Hypothesis labels reported per (M, channel), in report order.
    pub fn probes(&self) -> Vec<String> {
        match self.attack {
            AttackKind::WireBilateral | AttackKind::WireUnilateral => {
                ResistorChoice::ALL.iter().map(|c| c.to_string()).collect()
            }
            AttackKind::SourceBilateral => source_probes(&[Side::Alice, Side::Bob]),
            AttackKind::SourceUnilateral => source_probes(&[Side::Alice]),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| KljnError::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies every key present in `patch`.
    pub fn patched(mut self, patch: &ConfigPatch) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = &patch.$f {
                    self.$f = v.clone();
                }
            )*};
        }
        take!(
            attack,
            truth,
            channels,
            m_grid,
            mode,
            decision,
            n_trials,
            master_seed,
            r_low,
            r_high,
            t_eff,
            bandwidth,
            boltzmann,
            n_steps,
            ensemble
        );
        if patch.attack.is_some() && patch.channels.is_none() {
            self.channels = if self.attack.is_wire() {
                Channel::WIRE.to_vec()
            } else {
                vec![Channel::Source]
            };
        }
        self
    }
}

fn source_probes(sides: &[Side]) -> Vec<String> {
    sides
        .iter()
        .flat_map(|s| {
            Resistor::BOTH
                .iter()
                .map(move |r| format!("{}:R_{r}", s.as_str()))
        })
        .collect()
}

/// A partial configuration: any subset of the [`ExperimentConfig`] keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub attack: Option<AttackKind>,
    pub truth: Option<TruthSpec>,
    pub channels: Option<Vec<Channel>>,
    pub m_grid: Option<Vec<f64>>,
    pub mode: Option<MixingMode>,
    pub decision: Option<DecisionRule>,
    pub n_trials: Option<u64>,
    pub master_seed: Option<u64>,
    pub r_low: Option<f64>,
    pub r_high: Option<f64>,
    pub t_eff: Option<f64>,
    pub bandwidth: Option<f64>,
    pub boltzmann: Option<f64>,
    pub n_steps: Option<usize>,
    pub ensemble: Option<usize>,
}

impl ConfigPatch {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| KljnError::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KljnError::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

/// Outcome of one (M, channel) grid point within a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub m: f64,
    pub channel: Channel,
    /// One verdict for wire attacks, Alice then Bob for bilateral source.
    pub verdicts: Vec<AttackVerdict>,
    /// Unilateral source only; `None` inside means no consistent value.
    pub inferred_bob: Option<Option<Resistor>>,
    /// The full answer: the combination, or every side Eve names.
    pub correct: bool,
}

impl PointOutcome {
    /// Scores in the order of [`ExperimentConfig::probes`].
    pub fn probe_scores(&self) -> Vec<f64> {
        self.verdicts
            .iter()
            .flat_map(|v| v.scores.iter().map(|(_, s)| *s))
            .collect()
    }

    fn side_correct(&self, side: Side) -> Option<bool> {
        self.verdicts
            .iter()
            .find(|v| v.side == Some(side))
            .and_then(|v| v.correct)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub index: u64,
    pub truth: ResistorChoice,
    /// M-major, then channel.
    pub points: Vec<PointOutcome>,
}

/// Runs trial `index` of `config` across the whole M grid.
///
/// Generators, Eve's mixing noises and unilateral dummies are drawn once per
/// trial and reused at every M.
pub fn run_trial(config: &ExperimentConfig, index: u64) -> Result<TrialOutcome> {
    config.validate()?;
    trial(config, index).map_err(|e| KljnError::Trial {
        index,
        source: Box::new(e),
    })
}

fn trial(config: &ExperimentConfig, index: u64) -> Result<TrialOutcome> {
    let params = config.params();
    let streams = StreamFactory::new(config.master_seed);
    let truth = match config.truth {
        TruthSpec::Fixed(c) => c,
        TruthSpec::Random => random_state(&mut streams.stream(Purpose::Switch, index, 0)),
    };
    let bank = make_source_bank(&params, &streams, index)?;
    let (ra, rb) = truth.resistances(&params);
    let measured = synthesize_wire(
        bank.get(Side::Alice, truth.alice),
        bank.get(Side::Bob, truth.bob),
        ra,
        rb,
    )?;
    let mixing = unit_bank(&params, &streams, Purpose::EveMix, index)?;
    let channels = config.effective_channels();

    let mut points = Vec::with_capacity(config.m_grid.len() * channels.len());
    for (mi, &m) in config.m_grid.iter().enumerate() {
        let eve = EveModel::from_mixing(&bank, &mixing, m, config.mode, &params)?;
        for (ci, &channel) in channels.iter().enumerate() {
            let mut tie = streams.stream(Purpose::TieBreak, index, (mi * 4 + ci) as u32);
            let point = match config.attack {
                AttackKind::WireBilateral | AttackKind::WireUnilateral => {
                    let v = if config.attack == AttackKind::WireBilateral {
                        bilateral_wire_attack(
                            &measured,
                            &eve,
                            channel,
                            config.decision,
                            &params,
                            &mut tie,
                        )?
                    } else {
                        let mut dummies = streams.stream(Purpose::Dummy, index, 0);
                        unilateral_wire_attack(
                            &measured,
                            &eve,
                            &mut dummies,
                            channel,
                            config.decision,
                            &params,
                            &mut tie,
                        )?
                    };
                    let v = v.judge(Hypothesis::Combo(truth));
                    let correct = v.correct == Some(true);
                    PointOutcome {
                        m,
                        channel,
                        verdicts: vec![v],
                        inferred_bob: None,
                        correct,
                    }
                }
                AttackKind::SourceBilateral => {
                    let (a, b) = bilateral_source_attack(&measured, &eve, &params, &mut tie)?;
                    let a = a.judge(Hypothesis::Holds(truth.alice));
                    let b = b.judge(Hypothesis::Holds(truth.bob));
                    let correct = a.correct == Some(true) && b.correct == Some(true);
                    PointOutcome {
                        m,
                        channel,
                        verdicts: vec![a, b],
                        inferred_bob: None,
                        correct,
                    }
                }
                AttackKind::SourceUnilateral => {
                    let (a, bob) = unilateral_source_attack(&measured, &eve, &params, &mut tie)?;
                    let a = a.judge(Hypothesis::Holds(truth.alice));
                    let correct = a.correct == Some(true) && bob == Some(truth.bob);
                    PointOutcome {
                        m,
                        channel,
                        verdicts: vec![a],
                        inferred_bob: Some(bob),
                        correct,
                    }
                }
            };
            points.push(point);
        }
    }
    Ok(TrialOutcome {
        index,
        truth,
        points,
    })
}

/// One statistic row of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub attack: AttackKind,
    pub knowledge: Knowledge,
    pub channel: Channel,
    pub mode: MixingMode,
    #[serde(rename = "M")]
    pub m: f64,
    pub truth: String,
    pub probe: String,
    pub mean_ccc: f64,
    /// Absent for a single trial.
    pub se_ccc: Option<f64>,
    pub p: f64,
    pub n_trials: u64,
    pub n_steps: usize,
    pub master_seed: u64,
}

/// Correct-guess fractions for one (M, channel) grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "M")]
    pub m: f64,
    pub channel: Channel,
    /// The table figure: see [`SCORING`].
    pub p: f64,
    /// Full answer correct.
    pub p_joint: f64,
    pub p_alice: Option<f64>,
    pub p_bob: Option<f64>,
    /// Unilateral source: Bob's resistor inferred correctly.
    pub p_inference: Option<f64>,
    /// Trials whose guess needed a tie break.
    pub ties: u64,
}

/// How `p` is scored, written into every report.
pub const SCORING: &str = "wire: p = fraction of trials naming the true combination; \
source-bilateral: row p is the side's own fraction correct, summary p is Bob's side, p_joint needs both sides; \
source-unilateral: p needs Alice's resistor and the inferred Bob resistor";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub version: String,
    pub scoring: String,
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

pub const REPORT_COLUMNS: &str =
    "attack,knowledge,channel,mode,M,truth,probe,mean_ccc,se_ccc,p,n_trials,n_steps,master_seed";

/// Runs every trial on the current rayon pool and aggregates in index order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let outcomes: Vec<Result<TrialOutcome>> = (0..config.n_trials)
        .into_par_iter()
        .map(|k| run_trial(config, k))
        .collect();
    let mut trials = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        trials.push(o?);
    }
    aggregate(config, &trials)
}

/// [`run_sweep`] on a dedicated pool of `threads` workers (`None`: rayon's default).
pub fn run_sweep_with_threads(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<SweepReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(KljnError::invalid("thread count must be >= 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| KljnError::invalid(format!("cannot start thread pool: {e}")))?;
    pool.install(|| run_sweep(config))
}

/// Folds finished trials, which must be in index order, into a report.
pub fn aggregate(config: &ExperimentConfig, trials: &[TrialOutcome]) -> Result<SweepReport> {
    config.validate()?;
    if trials.len() as u64 != config.n_trials {
        return Err(KljnError::invalid(format!(
            "expected {} trials, got {}",
            config.n_trials,
            trials.len()
        )));
    }
    let channels = config.effective_channels();
    let probes = config.probes();
    let n_points = config.m_grid.len() * channels.len();
    let n = config.n_trials as f64;

    let mut scores = vec![vec![MeanAccumulator::default(); probes.len()]; n_points];
    let mut joint = vec![0u64; n_points];
    let mut alice = vec![0u64; n_points];
    let mut bob = vec![0u64; n_points];
    let mut inferred = vec![0u64; n_points];
    let mut ties = vec![0u64; n_points];
    for t in trials {
        if t.points.len() != n_points {
            return Err(KljnError::invalid(format!(
                "trial {} has the wrong shape",
                t.index
            )));
        }
        for (j, pt) in t.points.iter().enumerate() {
            let s = pt.probe_scores();
            if s.len() != probes.len() {
                return Err(KljnError::invalid(format!(
                    "trial {} has the wrong shape",
                    t.index
                )));
            }
            for (acc, v) in scores[j].iter_mut().zip(s) {
                acc.push(v);
            }
            joint[j] += pt.correct as u64;
            alice[j] += (pt.side_correct(Side::Alice) == Some(true)) as u64;
            bob[j] += (pt.side_correct(Side::Bob) == Some(true)) as u64;
            inferred[j] += (pt.inferred_bob == Some(Some(t.truth.bob))) as u64;
            ties[j] += pt.verdicts.iter().any(|v| v.tie_broken) as u64;
        }
    }

    let frac = |c: u64| c as f64 / n;
    let mut rows = Vec::with_capacity(n_points * probes.len());
    let mut summary = Vec::with_capacity(n_points);
    for (mi, &m) in config.m_grid.iter().enumerate() {
        for (ci, &channel) in channels.iter().enumerate() {
            let j = mi * channels.len() + ci;
            let (p_alice, p_bob, p_inference) = match config.attack {
                AttackKind::SourceBilateral => (Some(frac(alice[j])), Some(frac(bob[j])), None),
                AttackKind::SourceUnilateral => {
                    (Some(frac(alice[j])), None, Some(frac(inferred[j])))
                }
                _ => (None, None, None),
            };
            let p_joint = frac(joint[j]);
            for (k, probe) in probes.iter().enumerate() {
                let p = match config.attack {
                    AttackKind::SourceBilateral if probe.starts_with("alice") => frac(alice[j]),
                    AttackKind::SourceBilateral => frac(bob[j]),
                    _ => p_joint,
                };
                rows.push(SweepRow {
                    attack: config.attack,
                    knowledge: config.attack.knowledge(),
                    channel,
                    mode: config.mode,
                    m,
                    truth: config.truth.to_string(),
                    probe: probe.clone(),
                    mean_ccc: scores[j][k].mean(),
                    se_ccc: scores[j][k].standard_error(),
                    p,
                    n_trials: config.n_trials,
                    n_steps: config.n_steps,
                    master_seed: config.master_seed,
                });
            }
            summary.push(SummaryRow {
                m,
                channel,
                p: p_bob.unwrap_or(p_joint),
                p_joint,
                p_alice,
                p_bob,
                p_inference,
                ties: ties[j],
            });
        }
    }
    Ok(SweepReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        scoring: SCORING.to_string(),
        config: config.clone(),
        rows,
        summary,
    })
}

/// Rounds to six significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Six significant digits, positional when that stays short.
pub fn format_stat(x: f64) -> String {
    let r = round_sig6(x);
    if r == 0.0 {
        "0".to_string()
    } else if (1e-4..1e6).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = KljnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(KljnError::invalid(format!("unknown report format '{s}'"))),
        }
    }
}

impl ReportFormat {
    /// From a file extension, defaulting to CSV.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

impl SweepReport {
    /// Statistics rounded to what the files carry.
    pub fn rounded(&self) -> SweepReport {
        let mut out = self.clone();
        for r in &mut out.rows {
            r.mean_ccc = round_sig6(r.mean_ccc);
            r.se_ccc = r.se_ccc.map(round_sig6);
            r.p = round_sig6(r.p);
        }
        for s in &mut out.summary {
            s.p = round_sig6(s.p);
            s.p_joint = round_sig6(s.p_joint);
            s.p_alice = s.p_alice.map(round_sig6);
            s.p_bob = s.p_bob.map(round_sig6);
            s.p_inference = s.p_inference.map(round_sig6);
        }
        out
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("# kljn-report v1\n");
        let _ = writeln!(out, "# version={}", self.version);
        let _ = writeln!(out, "# scoring={}", self.scoring);
        let _ = writeln!(
            out,
            "# config={}",
            serde_json::to_string(&self.config).expect("config serializes")
        );
        out.push_str(REPORT_COLUMNS);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.attack,
                r.knowledge,
                r.channel,
                r.mode,
                r.m,
                r.truth,
                r.probe,
                format_stat(r.mean_ccc),
                r.se_ccc.map(format_stat).unwrap_or_default(),
                format_stat(r.p),
                r.n_trials,
                r.n_steps,
                r.master_seed
            );
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.rounded()).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv_string(),
            ReportFormat::Json => self.to_json_string(),
        }
    }

    pub fn export(&self, format: ReportFormat, path: &Path) -> Result<()> {
        std::fs::write(path, self.render(format)).map_err(|e| KljnError::io(path, e))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| KljnError::Parse(e.to_string()))
    }

    /// Reads the statistic rows back from [`to_csv_string`](Self::to_csv_string) output.
    pub fn rows_from_csv_str(text: &str) -> Result<Vec<SweepRow>> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        match lines.next() {
            Some(h) if h.trim() == REPORT_COLUMNS => {}
            other => {
                return Err(KljnError::Parse(format!(
                    "expected report header, got {:?}",
                    other.unwrap_or("")
                )))
            }
        }
        let parse_err =
            |line: usize, what: &str| KljnError::Parse(format!("row {line}: bad {what}"));
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 13 {
                return Err(KljnError::Parse(format!(
                    "row {k}: expected 13 fields, got {}",
                    f.len()
                )));
            }
            let num = |i: usize, what: &str| f[i].parse::<f64>().map_err(|_| parse_err(k, what));
            rows.push(SweepRow {
                attack: f[0].parse()?,
                knowledge: f[1].parse()?,
                channel: f[2].parse()?,
                mode: f[3].parse()?,
                m: num(4, "M")?,
                truth: f[5].to_string(),
                probe: f[6].to_string(),
                mean_ccc: num(7, "mean_ccc")?,
                se_ccc: if f[8].is_empty() {
                    None
                } else {
                    Some(num(8, "se_ccc")?)
                },
                p: num(9, "p")?,
                n_trials: f[10].parse().map_err(|_| parse_err(k, "n_trials"))?,
                n_steps: f[11].parse().map_err(|_| parse_err(k, "n_steps"))?,
                master_seed: f[12].parse().map_err(|_| parse_err(k, "master_seed"))?,
            });
        }
        Ok(rows)
    }

    pub fn row(&self, m: f64, channel: Channel, probe: &str) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.m == m && r.channel == channel && r.probe == probe)
    }

    pub fn summary_at(&self, m: f64, channel: Channel) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.m == m && s.channel == channel)
    }
}

/// One simulated mean CCC against its closed-form prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub truth: ResistorChoice,
    pub probe: String,
    pub channel: Channel,
    pub knowledge: Knowledge,
    pub mode: MixingMode,
    #[serde(rename = "M")]
    pub m: f64,
    pub predicted: f64,
    pub simulated: f64,
    pub se: Option<f64>,
    pub z: f64,
}

/// Differences below this count as exact agreement when the standard error
/// vanishes.
const EXACT: f64 = 1e-9;

fn z_score(simulated: f64, predicted: f64, se: Option<f64>) -> f64 {
    let diff = simulated - predicted;
    if diff.abs() <= EXACT {
        return 0.0;
    }
    match se {
        Some(se) if se > 0.0 => diff / se,
        _ => diff.signum() * f64::INFINITY,
    }
}

fn predict_row(config: &ExperimentConfig, truth: ResistorChoice, row: &SweepRow) -> Result<f64> {
    let params = config.params();
    if config.attack.is_wire() {
        let probe: ResistorChoice = row.probe.parse()?;
        predict_ccc(
            truth,
            probe,
            row.channel,
            row.knowledge,
            row.m,
            row.mode,
            &params,
        )
    } else {
        let (side, r) = row
            .probe
            .split_once(":R_")
            .ok_or_else(|| KljnError::Parse(format!("bad source probe '{}'", row.probe)))?;
        let side = match side {
            "alice" => Side::Alice,
            "bob" => Side::Bob,
            _ => {
                return Err(KljnError::Parse(format!(
                    "bad source probe '{}'",
                    row.probe
                )))
            }
        };
        let against = match r {
            "L" => Resistor::L,
            "H" => Resistor::H,
            _ => {
                return Err(KljnError::Parse(format!(
                    "bad source probe '{}'",
                    row.probe
                )))
            }
        };
        predict_source_ccc(truth, side, params.r_low, against, row.m, row.mode, &params)
    }
}

/// Compares every row against the oracle. Needs a fixed truth.
pub fn oracle_comparison(report: &SweepReport) -> Result<Vec<OracleComparison>> {
    let truth = match report.config.truth {
        TruthSpec::Fixed(c) => c,
        TruthSpec::Random => {
            return Err(KljnError::invalid("oracle comparison needs a fixed truth"))
        }
    };
    report
        .rows
        .iter()
        .map(|row| {
            let predicted = predict_row(&report.config, truth, row)?;
            Ok(OracleComparison {
                truth,
                probe: row.probe.clone(),
                channel: row.channel,
                knowledge: row.knowledge,
                mode: row.mode,
                m: row.m,
                predicted,
                simulated: row.mean_ccc,
                se: row.se_ccc,
                z: z_score(row.mean_ccc, predicted, row.se_ccc),
            })
        })
        .collect()
}

pub const VERIFY_COLUMNS: &str = "truth,probe,channel,knowledge,mode,M,predicted,simulated,se,z";

pub fn comparisons_to_csv(rows: &[OracleComparison]) -> String {
    let mut out = String::from(VERIFY_COLUMNS);
    out.push('\n');
    for c in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.truth,
            c.probe,
            c.channel,
            c.knowledge,
            c.mode,
            c.m,
            format_stat(c.predicted),
            format_stat(c.simulated),
            c.se.map(format_stat).unwrap_or_default(),
            if c.z.is_finite() {
                format_stat(c.z)
            } else {
                format!("{}", c.z)
            }
        );
    }
    out
}

/// Published p against the simulated one at one M.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedCheck {
    pub m: f64,
    pub channel: Channel,
    pub published: f64,
    pub simulated: f64,
    pub within: bool,
    /// Whether this column decides `tables --check`.
    pub gated: bool,
}

/// Tolerance on each published probability.
pub const P_TOLERANCE: f64 = 0.05;

/// Checks the summary p of `report` against a published table.
pub fn published_check(
    report: &SweepReport,
    table: &crate::presets::RefTable,
) -> Result<Vec<PublishedCheck>> {
    let mut out = Vec::new();
    for (channel, ps) in table.p {
        if !report.config.effective_channels().contains(channel) {
            continue;
        }
        for (&m, &published) in table.grid.iter().zip(ps.iter()) {
            let s = report.summary_at(m, *channel).ok_or_else(|| {
                KljnError::invalid(format!("report has no {channel} point at M = {m}"))
            })?;
            out.push(PublishedCheck {
                m,
                channel: *channel,
                published,
                simulated: s.p,
                within: (s.p - published).abs() <= P_TOLERANCE + 1e-12,
                gated: *channel == table.gated,
            });
        }
    }
    Ok(out)
}
