//! One bit-exchange period of the ideal KLJN loop.
//!
//! Current is positive when it flows from Alice to Bob.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KljnError, Result};
use crate::params::SystemParams;
use crate::trace::NoiseTrace;

const WIRE_MAGIC: &str = "# kljn-wire v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Resistor {
    L,
    H,
}

impl Resistor {
    pub const BOTH: [Resistor; 2] = [Resistor::L, Resistor::H];

    pub fn other(self) -> Resistor {
        match self {
            Resistor::L => Resistor::H,
            Resistor::H => Resistor::L,
        }
    }
}

impl std::fmt::Display for Resistor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Resistor::L => "L",
            Resistor::H => "H",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Alice,
    Bob,
}

impl Side {
    pub fn letter(self) -> &'static str {
        match self {
            Side::Alice => "A",
            Side::Bob => "B",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Alice => "alice",
            Side::Bob => "bob",
        }
    }
}

/// Alice's and Bob's resistor selections for one period, written Alice-first
/// (`LH` = Alice on R_L, Bob on R_H).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResistorChoice {
    pub alice: Resistor,
    pub bob: Resistor,
}

impl ResistorChoice {
    pub const HH: ResistorChoice = ResistorChoice::new(Resistor::H, Resistor::H);
    pub const LL: ResistorChoice = ResistorChoice::new(Resistor::L, Resistor::L);
    pub const HL: ResistorChoice = ResistorChoice::new(Resistor::H, Resistor::L);
    pub const LH: ResistorChoice = ResistorChoice::new(Resistor::L, Resistor::H);

    /// Table order: HH, LL, HL, LH.
    pub const ALL: [ResistorChoice; 4] = [Self::HH, Self::LL, Self::HL, Self::LH];

    pub const fn new(alice: Resistor, bob: Resistor) -> Self {
        ResistorChoice { alice, bob }
    }

    /// Mixed selections leave the wire level ambiguous to an eavesdropper.
    pub fn secure(self) -> bool {
        self.alice != self.bob
    }

    /// Alice's selection as the key bit (L = 0, H = 1), for secure periods only.
    pub fn key_bit(self) -> Option<u8> {
        self.secure().then_some(match self.alice {
            Resistor::L => 0,
            Resistor::H => 1,
        })
    }

    pub fn get(self, side: Side) -> Resistor {
        match side {
            Side::Alice => self.alice,
            Side::Bob => self.bob,
        }
    }

    pub fn resistances(self, params: &SystemParams) -> (f64, f64) {
        (params.resistance(self.alice), params.resistance(self.bob))
    }

    pub fn level(self) -> Level {
        match (self.alice, self.bob) {
            (Resistor::L, Resistor::L) => Level::Low,
            (Resistor::H, Resistor::H) => Level::High,
            _ => Level::Mid,
        }
    }

    pub fn label(self) -> String {
        format!("{}{}", self.alice, self.bob)
    }
}

impl std::fmt::Display for ResistorChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.alice, self.bob)
    }
}

impl std::str::FromStr for ResistorChoice {
    type Err = KljnError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "HH" => Ok(Self::HH),
            "LL" => Ok(Self::LL),
            "HL" => Ok(Self::HL),
            "LH" => Ok(Self::LH),
            _ => Err(KljnError::invalid(format!(
                "unknown resistor combination '{s}'"
            ))),
        }
    }
}

impl Serialize for ResistorChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ResistorChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The three mean-square voltage levels an observer can tell apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Mid,
    High,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Mid => "mid",
            Level::High => "high",
        }
    }

    /// Resistor combinations producing this level.
    pub fn combos(self) -> &'static [ResistorChoice] {
        match self {
            Level::Low => &[ResistorChoice::LL],
            Level::Mid => &[ResistorChoice::HL, ResistorChoice::LH],
            Level::High => &[ResistorChoice::HH],
        }
    }
}

/// Wire voltage, current and instantaneous power of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct WireRecord {
    pub u_w: NoiseTrace,
    pub i_w: NoiseTrace,
    pub p_w: NoiseTrace,
}

impl WireRecord {
    pub fn len(&self) -> usize {
        self.u_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_w.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.u_w.dt()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * 72 + 64);
        out.push_str(WIRE_MAGIC);
        out.push('\n');
        let _ = writeln!(out, "# dt_s={:?}", self.dt());
        out.push_str("u_w_volts,i_w_amps,p_w_watts\n");
        for ((u, i), p) in self
            .u_w
            .samples()
            .iter()
            .zip(self.i_w.samples())
            .zip(self.p_w.samples())
        {
            let _ = writeln!(out, "{u:.16e},{i:.16e},{p:.16e}");
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(WIRE_MAGIC) {
            return Err(KljnError::Parse(format!("missing '{WIRE_MAGIC}' header")));
        }
        let mut dt = None;
        let mut header = false;
        let (mut u, mut i, mut p) = (Vec::new(), Vec::new(), Vec::new());
        for line in lines {
            let line = line.trim_end();
            if let Some(rest) = line.strip_prefix("# dt_s=") {
                dt = Some(
                    rest.trim()
                        .parse::<f64>()
                        .map_err(|e| KljnError::Parse(format!("bad dt_s: {e}")))?,
                );
            } else if line.starts_with('#') || line.is_empty() {
                continue;
            } else if !header {
                if line != "u_w_volts,i_w_amps,p_w_watts" {
                    return Err(KljnError::Parse(format!("unexpected columns '{line}'")));
                }
                header = true;
            } else {
                let vals: Vec<f64> = line
                    .split(',')
                    .map(|f| f.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| KljnError::Parse(format!("bad row '{line}': {e}")))?;
                if vals.len() != 3 {
                    return Err(KljnError::Parse(format!("expected 3 fields in '{line}'")));
                }
                u.push(vals[0]);
                i.push(vals[1]);
                p.push(vals[2]);
            }
        }
        let dt = dt.ok_or_else(|| KljnError::Parse("missing '# dt_s=' header".into()))?;
        Ok(WireRecord {
            u_w: NoiseTrace::new(u, dt, "U_w")?,
            i_w: NoiseTrace::new(i, dt, "I_w")?,
            p_w: NoiseTrace::new(p, dt, "P_w")?,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| KljnError::io(path, e))
    }
}

/// Loop current from Alice's and Bob's generator voltages, then the wire
/// voltage seen across Bob's branch and the power flowing Alice to Bob.
pub fn synthesize_wire(
    u_a: &NoiseTrace,
    u_b: &NoiseTrace,
    r_a: f64,
    r_b: f64,
) -> Result<WireRecord> {
    u_a.ensure_aligned(u_b)?;
    if !(r_a > 0.0 && r_b > 0.0) {
        return Err(KljnError::invalid(format!(
            "resistances must be > 0, got {r_a} and {r_b}"
        )));
    }
    let r_loop = r_a + r_b;
    let n = u_a.len();
    let mut u = Vec::with_capacity(n);
    let mut i = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    for (&a, &b) in u_a.samples().iter().zip(u_b.samples()) {
        let current = (a - b) / r_loop;
        let voltage = current * r_b + b;
        u.push(voltage);
        i.push(current);
        p.push(voltage * current);
    }
    let dt = u_a.dt();
    Ok(WireRecord {
        u_w: NoiseTrace::new(u, dt, "U_w")?,
        i_w: NoiseTrace::new(i, dt, "I_w")?,
        p_w: NoiseTrace::new(p, dt, "P_w")?,
    })
}

pub fn parallel_resistance(r_a: f64, r_b: f64) -> Result<f64> {
    if !(r_a > 0.0 && r_b > 0.0) {
        return Err(KljnError::invalid(format!(
            "resistances must be > 0, got {r_a} and {r_b}"
        )));
    }
    Ok(r_a * r_b / (r_a + r_b))
}

/// Johnson mean square of the wire voltage for the given pair.
pub fn expected_mean_square(r_a: f64, r_b: f64, params: &SystemParams) -> Result<f64> {
    Ok(params.noise_power_per_ohm() * parallel_resistance(r_a, r_b)?)
}

fn level_values(params: &SystemParams) -> Result<[(Level, f64); 3]> {
    Ok([
        (
            Level::Low,
            expected_mean_square(params.r_low, params.r_low, params)?,
        ),
        (
            Level::Mid,
            expected_mean_square(params.r_low, params.r_high, params)?,
        ),
        (
            Level::High,
            expected_mean_square(params.r_high, params.r_high, params)?,
        ),
    ])
}

/// Nearest theoretical level in log-ratio distance.
pub fn classify_level(measured_ms: f64, params: &SystemParams) -> Result<Level> {
    if !(measured_ms >= 0.0) {
        return Err(KljnError::invalid(format!(
            "mean square must be >= 0, got {measured_ms}"
        )));
    }
    let levels = level_values(params)?;
    let mut best = levels[0];
    let mut best_d = f64::INFINITY;
    for (lvl, v) in levels {
        let d = (measured_ms / v).ln().abs();
        if d < best_d {
            best = (lvl, v);
            best_d = d;
        }
    }
    Ok(best.0)
}

fn nearest(target: f64, value: impl Fn(Resistor) -> f64) -> (Resistor, f64) {
    Resistor::BOTH
        .into_iter()
        .map(|r| (r, (target / value(r)).ln().abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("two candidates")
}

/// Infers the partner's resistor from the own resistor and the wire mean
/// square over the period.
///
/// Solves `R_P = R_own R / (R_own + R)` for `R` and snaps to R_L or R_H in
/// log distance. A measured `R_P >= R_own` has no solution; it is then snapped
/// to the partner whose parallel combination lies within 50% of `R_P`, or
/// rejected.
pub fn infer_other_resistor(
    r_own: f64,
    measured_ms: f64,
    params: &SystemParams,
) -> Result<Resistor> {
    if r_own != params.r_low && r_own != params.r_high {
        return Err(KljnError::invalid(format!(
            "own resistance {r_own} is neither R_L nor R_H"
        )));
    }
    if !(measured_ms >= 0.0) {
        return Err(KljnError::invalid(format!(
            "mean square must be >= 0, got {measured_ms}"
        )));
    }
    let r_p = measured_ms / params.noise_power_per_ohm();
    if r_p > 0.0 && r_p < r_own {
        let partner = r_p * r_own / (r_own - r_p);
        return Ok(nearest(partner, |r| params.resistance(r)).0);
    }
    let parallel = |r: Resistor| r_own * params.resistance(r) / (r_own + params.resistance(r));
    let (r, _) = nearest(r_p, parallel);
    if (r_p / parallel(r) - 1.0).abs() <= 0.5 {
        Ok(r)
    } else {
        Err(KljnError::InferenceDegenerate {
            r_parallel: r_p,
            r_own,
        })
    }
}
