//! Eve's cross-correlation statistic and the four attack protocols.
//!
//! Wire attacks simulate the loop once per resistor hypothesis from Eve's
//! correlated copies and correlate each simulated channel against the
//! measured one. Source attacks invert the loop law with a hypothesised
//! resistance and correlate the reconstructed generator voltage against
//! Eve's copies. Unilateral variants replace Bob's copies with dummies
//! (wire) or complete the answer from the wire mean square (source).

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    classify_level, infer_other_resistor, synthesize_wire, Resistor, ResistorChoice, Side,
    WireRecord,
};
use crate::error::{KljnError, Result};
use crate::noise::{scale_to_johnson, unit_noise, EveModel};
use crate::params::SystemParams;
use crate::stats::pearson;
use crate::trace::NoiseTrace;

/// One of Eve's simulated resistor situations.
pub type ProbeCombo = ResistorChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Voltage,
    Current,
    Power,
    /// Reconstructed generator voltage (source attacks).
    Source,
}

impl Channel {
    pub const WIRE: [Channel; 3] = [Channel::Voltage, Channel::Current, Channel::Power];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Voltage => "voltage",
            Channel::Current => "current",
            Channel::Power => "power",
            Channel::Source => "source",
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Channel {
    type Err = KljnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voltage" | "u" => Ok(Channel::Voltage),
            "current" | "i" => Ok(Channel::Current),
            "power" | "p" => Ok(Channel::Power),
            "source" => Ok(Channel::Source),
            _ => Err(KljnError::invalid(format!("unknown channel '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    WireBilateral,
    SourceBilateral,
    WireUnilateral,
    SourceUnilateral,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::WireBilateral,
        AttackKind::SourceBilateral,
        AttackKind::WireUnilateral,
        AttackKind::SourceUnilateral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::WireBilateral => "wire-bilateral",
            AttackKind::SourceBilateral => "source-bilateral",
            AttackKind::WireUnilateral => "wire-unilateral",
            AttackKind::SourceUnilateral => "source-unilateral",
        }
    }

    pub fn knowledge(self) -> Knowledge {
        match self {
            AttackKind::WireBilateral | AttackKind::SourceBilateral => Knowledge::Bilateral,
            AttackKind::WireUnilateral | AttackKind::SourceUnilateral => Knowledge::UnilateralAlice,
        }
    }

    pub fn is_wire(self) -> bool {
        matches!(self, AttackKind::WireBilateral | AttackKind::WireUnilateral)
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AttackKind {
    type Err = KljnError;
    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| KljnError::invalid(format!("unknown attack '{s}'")))
    }
}

/// Which of the parties' generators Eve holds correlated copies of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Knowledge {
    Bilateral,
    UnilateralAlice,
}

impl Knowledge {
    pub fn as_str(self) -> &'static str {
        match self {
            Knowledge::Bilateral => "bilateral",
            Knowledge::UnilateralAlice => "unilateral-alice",
        }
    }
}

impl std::str::FromStr for Knowledge {
    type Err = KljnError;
    fn from_str(s: &str) -> Result<Self> {
        [Knowledge::Bilateral, Knowledge::UnilateralAlice]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| KljnError::invalid(format!("unknown knowledge '{s}'")))
    }
}

impl std::fmt::Display for Knowledge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a wire attack turns four scores into a guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionRule {
    /// Eve first reads the mean-square level off the wire and only ranks the
    /// combinations that produce that level (LH against HL in a secure period).
    #[default]
    LevelGated,
    /// Highest score among all four combinations.
    Argmax,
}

impl DecisionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionRule::LevelGated => "level-gated",
            DecisionRule::Argmax => "argmax",
        }
    }
}

impl std::str::FromStr for DecisionRule {
    type Err = KljnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "level-gated" => Ok(DecisionRule::LevelGated),
            "argmax" => Ok(DecisionRule::Argmax),
            _ => Err(KljnError::invalid(format!("unknown decision rule '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Hypothesis {
    Combo(ProbeCombo),
    /// The verdict's side holds this resistor.
    Holds(Resistor),
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hypothesis::Combo(c) => write!(f, "{c}"),
            Hypothesis::Holds(r) => write!(f, "R_{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackVerdict {
    pub attack: AttackKind,
    pub channel: Channel,
    /// Set for source attacks: whose resistor the verdict is about.
    pub side: Option<Side>,
    /// Every hypothesis and its CCC, in table order.
    pub scores: Vec<(Hypothesis, f64)>,
    /// Hypotheses the guess was chosen from.
    pub candidates: Vec<Hypothesis>,
    pub guess: Hypothesis,
    pub tie_broken: bool,
    pub correct: Option<bool>,
}

impl AttackVerdict {
    pub fn score(&self, h: Hypothesis) -> Option<f64> {
        self.scores.iter().find(|(k, _)| *k == h).map(|(_, v)| *v)
    }

    pub fn judge(mut self, truth: Hypothesis) -> Self {
        self.correct = Some(self.guess == truth);
        self
    }

    /// One JSON object (no trailing newline) in the verdict-record layout.
    pub fn to_json_line(&self, m: f64) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            attack: &'a str,
            channel: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            side: Option<&'a str>,
            #[serde(rename = "M")]
            m: f64,
            scores: BTreeMap<String, f64>,
            guess: String,
            correct: Option<bool>,
            tie_broken: bool,
        }
        let rec = Record {
            attack: self.attack.as_str(),
            channel: self.channel.as_str(),
            side: self.side.map(Side::as_str),
            m,
            scores: self
                .scores
                .iter()
                .map(|(h, v)| (h.to_string(), *v))
                .collect(),
            guess: self.guess.to_string(),
            correct: self.correct,
            tie_broken: self.tie_broken,
        };
        serde_json::to_string(&rec).expect("verdict record serializes")
    }
}

/// Pearson cross-correlation coefficient of two equal-length traces.
pub fn ccc(x: &NoiseTrace, y: &NoiseTrace) -> Result<f64> {
    if x.len() != y.len() {
        return Err(KljnError::invalid(format!(
            "ccc length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    pearson(x.samples(), y.samples())
}

pub fn channel_trace(w: &WireRecord, ch: Channel) -> Result<&NoiseTrace> {
    match ch {
        Channel::Voltage => Ok(&w.u_w),
        Channel::Current => Ok(&w.i_w),
        Channel::Power => Ok(&w.p_w),
        Channel::Source => Err(KljnError::invalid("wire attacks need a wire channel")),
    }
}

/// Eve's simulated loop for one hypothesised resistor pair.
pub fn simulate_probe_wire(
    eve: &EveModel,
    probe: ProbeCombo,
    params: &SystemParams,
) -> Result<WireRecord> {
    let (ra, rb) = probe.resistances(params);
    synthesize_wire(
        eve.copies.get(Side::Alice, probe.alice),
        eve.copies.get(Side::Bob, probe.bob),
        ra,
        rb,
    )
}

fn pick<R: Rng + ?Sized>(
    scores: &[(Hypothesis, f64)],
    candidates: &[Hypothesis],
    tie_rng: &mut R,
) -> (Hypothesis, bool) {
    let cand: Vec<(Hypothesis, f64)> = scores
        .iter()
        .filter(|(h, _)| candidates.contains(h))
        .copied()
        .collect();
    let best = cand
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let top: Vec<Hypothesis> = cand
        .iter()
        .filter(|(_, v)| *v == best)
        .map(|(h, _)| *h)
        .collect();
    if top.len() == 1 {
        (top[0], false)
    } else {
        (top[tie_rng.random_range(0..top.len())], true)
    }
}

fn wire_attack<R: Rng + ?Sized>(
    kind: AttackKind,
    measured: &WireRecord,
    eve: &EveModel,
    channel: Channel,
    rule: DecisionRule,
    params: &SystemParams,
    tie_rng: &mut R,
) -> Result<AttackVerdict> {
    let target = channel_trace(measured, channel)?;
    let mut scores = Vec::with_capacity(4);
    for probe in ProbeCombo::ALL {
        let sim = simulate_probe_wire(eve, probe, params)?;
        target.ensure_aligned(&sim.u_w)?;
        scores.push((
            Hypothesis::Combo(probe),
            ccc(target, channel_trace(&sim, channel)?)?,
        ));
    }
    let candidates: Vec<Hypothesis> = match rule {
        DecisionRule::Argmax => ProbeCombo::ALL
            .iter()
            .map(|&c| Hypothesis::Combo(c))
            .collect(),
        DecisionRule::LevelGated => classify_level(measured.u_w.mean_square(), params)?
            .combos()
            .iter()
            .map(|&c| Hypothesis::Combo(c))
            .collect(),
    };
    let (guess, tie_broken) = pick(&scores, &candidates, tie_rng);
    Ok(AttackVerdict {
        attack: kind,
        channel,
        side: None,
        scores,
        candidates,
        guess,
        tie_broken,
        correct: None,
    })
}

/// Correlates the measured channel against Eve's four simulated loops.
pub fn bilateral_wire_attack<R: Rng + ?Sized>(
    measured: &WireRecord,
    eve: &EveModel,
    channel: Channel,
    rule: DecisionRule,
    params: &SystemParams,
    tie_rng: &mut R,
) -> Result<AttackVerdict> {
    wire_attack(
        AttackKind::WireBilateral,
        measured,
        eve,
        channel,
        rule,
        params,
        tie_rng,
    )
}

/// Hypothetical generator voltage of `side` if it were connected through `r_hyp`.
///
/// Alice: `U_w + I_w R`; Bob: `U_w - I_w R`.
pub fn reconstruct_source(measured: &WireRecord, side: Side, r_hyp: f64) -> Result<NoiseTrace> {
    if !(r_hyp > 0.0) {
        return Err(KljnError::invalid(format!(
            "hypothesis resistance must be > 0, got {r_hyp}"
        )));
    }
    measured.u_w.ensure_aligned(&measured.i_w)?;
    let sign = match side {
        Side::Alice => 1.0,
        Side::Bob => -1.0,
    };
    let rec = measured
        .u_w
        .samples()
        .iter()
        .zip(measured.i_w.samples())
        .map(|(u, i)| u + sign * i * r_hyp)
        .collect();
    NoiseTrace::new(rec, measured.dt(), format!("U*_L{}", side.letter()))
}

fn source_side<R: Rng + ?Sized>(
    kind: AttackKind,
    measured: &WireRecord,
    eve: &EveModel,
    side: Side,
    params: &SystemParams,
    tie_rng: &mut R,
) -> Result<AttackVerdict> {
    let rec = reconstruct_source(measured, side, params.r_low)?;
    let mut scores = Vec::with_capacity(2);
    for r in Resistor::BOTH {
        scores.push((Hypothesis::Holds(r), ccc(&rec, eve.copies.get(side, r))?));
    }
    let candidates = vec![
        Hypothesis::Holds(Resistor::L),
        Hypothesis::Holds(Resistor::H),
    ];
    let (guess, tie_broken) = pick(&scores, &candidates, tie_rng);
    Ok(AttackVerdict {
        attack: kind,
        channel: Channel::Source,
        side: Some(side),
        scores,
        candidates,
        guess,
        tie_broken,
        correct: None,
    })
}

/// Tests R_L against R_H on each side by correlating the R_L reconstruction
/// with Eve's L and H copies for that side.
pub fn bilateral_source_attack<R: Rng + ?Sized>(
    measured: &WireRecord,
    eve: &EveModel,
    params: &SystemParams,
    tie_rng: &mut R,
) -> Result<(AttackVerdict, AttackVerdict)> {
    let a = source_side(
        AttackKind::SourceBilateral,
        measured,
        eve,
        Side::Alice,
        params,
        tie_rng,
    )?;
    let b = source_side(
        AttackKind::SourceBilateral,
        measured,
        eve,
        Side::Bob,
        params,
        tie_rng,
    )?;
    Ok((a, b))
}

/// Wire attack with only Alice's copies: Bob's entries in `eve` are ignored
/// and replaced by two fresh Johnson-scaled dummies drawn from `dummy_rng`.
#[allow(clippy::too_many_arguments)]
pub fn unilateral_wire_attack<D: Rng + ?Sized, R: Rng + ?Sized>(
    measured: &WireRecord,
    eve: &EveModel,
    dummy_rng: &mut D,
    channel: Channel,
    rule: DecisionRule,
    params: &SystemParams,
    tie_rng: &mut R,
) -> Result<AttackVerdict> {
    let n = measured.len();
    let dt = measured.dt();
    let dummy_l = scale_to_johnson(
        &unit_noise(n, dt, params.ensemble, dummy_rng)?,
        params.r_low,
        params,
    )?;
    let dummy_h = scale_to_johnson(
        &unit_noise(n, dt, params.ensemble, dummy_rng)?,
        params.r_high,
        params,
    )?;
    let eve = eve.with_bob_dummies(dummy_l, dummy_h)?;
    wire_attack(
        AttackKind::WireUnilateral,
        measured,
        &eve,
        channel,
        rule,
        params,
        tie_rng,
    )
}

/// Alice-side hypothesis test, then Bob's resistor from the wire mean square
/// over the whole period. Bob's entries in `eve` are not used.
///
/// The inferred resistor is `None` when no partner value is consistent with
/// the guessed Alice resistor and the measured level.
pub fn unilateral_source_attack<R: Rng + ?Sized>(
    measured: &WireRecord,
    eve: &EveModel,
    params: &SystemParams,
    tie_rng: &mut R,
) -> Result<(AttackVerdict, Option<Resistor>)> {
    let verdict = source_side(
        AttackKind::SourceUnilateral,
        measured,
        eve,
        Side::Alice,
        params,
        tie_rng,
    )?;
    let r_alice = match verdict.guess {
        Hypothesis::Holds(r) => r,
        Hypothesis::Combo(_) => unreachable!("source verdicts hold resistor hypotheses"),
    };
    match infer_other_resistor(
        params.resistance(r_alice),
        measured.u_w.mean_square(),
        params,
    ) {
        Ok(bob) => Ok((verdict, Some(bob))),
        Err(KljnError::InferenceDegenerate { .. }) => Ok((verdict, None)),
        Err(e) => Err(e),
    }
}
