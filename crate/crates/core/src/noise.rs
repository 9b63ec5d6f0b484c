//! Gaussian band-limited white noise at Johnson level, and Eve's partially
//! correlated copies of the parties' generators.
//!
//! Pipeline for one noise record of `n` samples at spacing `tau`:
//!
//! 1. average `ensemble` independent standard-normal series of length
//!    `N = next_power_of_two(n)`, then force sample mean 0 and sample RMS 1;
//! 2. zero-pad the spectrum to `2N` bins and invert ([`antialias`]), which
//!    yields the band-limited interpolant on a grid of spacing `tau / 2`;
//! 3. keep every second sample, so the record sits on the `tau` grid and is
//!    white over the full `(0, bandwidth)` band, and truncate to `n`;
//! 4. rescale to the resistor's Johnson RMS ([`scale_to_johnson`]).

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::{Resistor, Side};
use crate::error::{KljnError, Result};
use crate::params::SystemParams;
use crate::rng::{Purpose, StreamFactory};
use crate::trace::NoiseTrace;

/// Averages `n_ensemble` standard-normal series pointwise and renormalizes the
/// result to sample mean 0 and sample RMS 1.
pub fn generate_unit_gaussian<R: Rng + ?Sized>(
    n_samples: usize,
    n_ensemble: usize,
    dt: f64,
    rng: &mut R,
) -> Result<NoiseTrace> {
    if n_samples < 2 {
        return Err(KljnError::invalid(format!(
            "n_samples must be >= 2, got {n_samples}"
        )));
    }
    if n_ensemble < 1 {
        return Err(KljnError::invalid("n_ensemble must be >= 1"));
    }
    let mut acc = vec![0.0f64; n_samples];
    for _ in 0..n_ensemble {
        for a in acc.iter_mut() {
            *a += rng.sample::<f64, _>(StandardNormal);
        }
    }
    normalize_unit(&mut acc)?;
    NoiseTrace::new(acc, dt, "unit-gaussian")
}

fn normalize_unit(x: &mut [f64]) -> Result<()> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter_mut().for_each(|v| *v -= m);
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    if !rms.is_finite() {
        return Err(KljnError::Numeric(format!("sample RMS evaluated to {rms}")));
    }
    if rms == 0.0 {
        return Err(KljnError::DegenerateSignal("zero-variance series".into()));
    }
    x.iter_mut().for_each(|v| *v /= rms);
    Ok(())
}

/// What [`antialias`] does with a length that is not a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthPolicy {
    #[default]
    Strict,
    /// Append zeros up to the next power of two first.
    PadToPowerOfTwo,
}

/// Doubles the band of `trace` by zero-padding its spectrum above the
/// original Nyquist bin, then inverse-transforms and keeps the real part.
///
/// The output has twice as many samples at half the spacing, carries no
/// power above the original Nyquist frequency, and is rescaled to the
/// input's sample RMS. The Nyquist bin is split evenly between the two
/// mirror positions so that even-indexed outputs reproduce the input.
pub fn antialias(trace: &NoiseTrace, policy: LengthPolicy) -> Result<NoiseTrace> {
    let mut samples = trace.samples().to_vec();
    if !samples.len().is_power_of_two() {
        match policy {
            LengthPolicy::Strict => {
                return Err(KljnError::invalid(format!(
                    "antialias needs a power-of-two length, got {}",
                    samples.len()
                )))
            }
            LengthPolicy::PadToPowerOfTwo => samples.resize(samples.len().next_power_of_two(), 0.0),
        }
    }
    let n = samples.len();
    let half = n / 2;
    let target_rms = trace.rms();

    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spec);

    let m = 2 * n;
    let mut wide = vec![Complex::new(0.0, 0.0); m];
    wide[..half].copy_from_slice(&spec[..half]);
    for k in 1..half {
        wide[m - k] = spec[n - k];
    }
    let nyq = spec[half] * 0.5;
    wide[half] = nyq;
    wide[m - half] = nyq;

    planner.plan_fft_inverse(m).process(&mut wide);
    let mut out: Vec<f64> = wide.iter().map(|c| c.re / n as f64).collect();

    let rms = (out.iter().map(|v| v * v).sum::<f64>() / m as f64).sqrt();
    if rms > 0.0 {
        let f = target_rms / rms;
        out.iter_mut().for_each(|v| *v *= f);
    }
    NoiseTrace::new(
        out,
        trace.dt() / 2.0,
        format!("{}+antialias", trace.label()),
    )
}

/// Keeps samples `0, factor, 2*factor, ...` and multiplies the spacing.
pub fn decimate(trace: &NoiseTrace, factor: usize) -> Result<NoiseTrace> {
    if factor == 0 {
        return Err(KljnError::invalid("decimation factor must be >= 1"));
    }
    NoiseTrace::new(
        trace.samples().iter().step_by(factor).copied().collect(),
        trace.dt() * factor as f64,
        trace.label().to_string(),
    )
}

/// RMS Johnson noise voltage `sqrt(4 k T_eff R bandwidth)` of one resistor.
pub fn johnson_rms(r: f64, params: &SystemParams) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(KljnError::invalid(format!(
            "resistance must be > 0, got {r}"
        )));
    }
    Ok((params.noise_power_per_ohm() * r).sqrt())
}

/// Rescales `trace` so its sample RMS equals the Johnson RMS of `r`.
pub fn scale_to_johnson(trace: &NoiseTrace, r: f64, params: &SystemParams) -> Result<NoiseTrace> {
    let target = johnson_rms(r, params)?;
    let rms = trace.rms();
    if rms == 0.0 {
        return Err(KljnError::DegenerateSignal(format!(
            "cannot scale zero-variance trace '{}'",
            trace.label()
        )));
    }
    trace.scaled(target / rms)
}

/// One unit-RMS band-limited record of `n` samples at spacing `dt`.
pub fn unit_noise<R: Rng + ?Sized>(
    n: usize,
    dt: f64,
    ensemble: usize,
    rng: &mut R,
) -> Result<NoiseTrace> {
    if n < 2 {
        return Err(KljnError::invalid(format!(
            "noise length must be >= 2, got {n}"
        )));
    }
    let raw = generate_unit_gaussian(n.next_power_of_two(), ensemble, dt, rng)?;
    let wide = antialias(&raw, LengthPolicy::Strict)?;
    let mut samples = decimate(&wide, 2)?.into_samples();
    samples.truncate(n);
    normalize_rms(&mut samples)?;
    NoiseTrace::new(samples, dt, "unit-noise")
}

fn normalize_rms(x: &mut [f64]) -> Result<()> {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if rms == 0.0 || !rms.is_finite() {
        return Err(KljnError::DegenerateSignal(format!("RMS is {rms}")));
    }
    x.iter_mut().for_each(|v| *v /= rms);
    Ok(())
}

/// Johnson-scaled band-limited noise for resistor `r`.
pub fn johnson_noise<R: Rng + ?Sized>(
    r: f64,
    params: &SystemParams,
    rng: &mut R,
) -> Result<NoiseTrace> {
    let unit = unit_noise(params.n_steps, params.time_step(), params.ensemble, rng)?;
    scale_to_johnson(&unit, r, params)
}

/// The four generator noises of one bit-exchange period.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBank {
    pub u_ha: NoiseTrace,
    pub u_la: NoiseTrace,
    pub u_hb: NoiseTrace,
    pub u_lb: NoiseTrace,
}

/// Slot order used for stream keys and arrays: HA, LA, HB, LB.
pub const BANK_SLOTS: [(Side, Resistor); 4] = [
    (Side::Alice, Resistor::H),
    (Side::Alice, Resistor::L),
    (Side::Bob, Resistor::H),
    (Side::Bob, Resistor::L),
];

fn slot_label(side: Side, r: Resistor) -> String {
    format!("U_{}{}", r, side.letter())
}

impl SourceBank {
    pub fn from_array([u_ha, u_la, u_hb, u_lb]: [NoiseTrace; 4]) -> Self {
        SourceBank {
            u_ha,
            u_la,
            u_hb,
            u_lb,
        }
    }

    pub fn get(&self, side: Side, r: Resistor) -> &NoiseTrace {
        match (side, r) {
            (Side::Alice, Resistor::H) => &self.u_ha,
            (Side::Alice, Resistor::L) => &self.u_la,
            (Side::Bob, Resistor::H) => &self.u_hb,
            (Side::Bob, Resistor::L) => &self.u_lb,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((Side, Resistor), &NoiseTrace)> {
        BANK_SLOTS
            .iter()
            .map(move |&(s, r)| ((s, r), self.get(s, r)))
    }

    pub fn len(&self) -> usize {
        self.u_ha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_ha.is_empty()
    }
}

/// Four unit-RMS records drawn from the `(purpose, trial, slot 0..4)` streams.
pub fn unit_bank(
    params: &SystemParams,
    streams: &StreamFactory,
    purpose: Purpose,
    trial: u64,
) -> Result<[NoiseTrace; 4]> {
    let mut out = Vec::with_capacity(4);
    for (slot, &(side, r)) in BANK_SLOTS.iter().enumerate() {
        let mut rng = streams.stream(purpose, trial, slot as u32);
        let t = unit_noise(
            params.n_steps,
            params.time_step(),
            params.ensemble,
            &mut rng,
        )?;
        out.push(t.with_label(slot_label(side, r)));
    }
    Ok(out.try_into().expect("four slots"))
}

/// Alice's and Bob's generator noises for trial `trial`, each from its own stream.
pub fn make_source_bank(
    params: &SystemParams,
    streams: &StreamFactory,
    trial: u64,
) -> Result<SourceBank> {
    params.validate()?;
    let units = unit_bank(params, streams, Purpose::Source, trial)?;
    let mut scaled = Vec::with_capacity(4);
    for (t, &(_, r)) in units.iter().zip(BANK_SLOTS.iter()) {
        scaled.push(scale_to_johnson(t, params.resistance(r), params)?);
    }
    Ok(SourceBank::from_array(
        scaled.try_into().expect("four slots"),
    ))
}

/// How the multiplier `M` enters Eve's mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingMode {
    /// Added noise carries the resistor's Johnson RMS while the party's noise
    /// is taken at unit RMS: gain `M * johnson_rms(R) / 1 V`.
    #[default]
    JohnsonScaled,
    /// Both terms at unit RMS: gain `M`, correlation independent of `R`.
    UnitScaled,
}

impl MixingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MixingMode::JohnsonScaled => "johnson-scaled",
            MixingMode::UnitScaled => "unit-scaled",
        }
    }
}

impl std::fmt::Display for MixingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MixingMode {
    type Err = KljnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "johnson-scaled" | "johnson" => Ok(MixingMode::JohnsonScaled),
            "unit-scaled" | "unit" => Ok(MixingMode::UnitScaled),
            _ => Err(KljnError::invalid(format!("unknown mixing mode '{s}'"))),
        }
    }
}

/// Gain applied to the unit-RMS mixing noise.
pub fn mixing_gain(m: f64, mode: MixingMode, r: f64, params: &SystemParams) -> Result<f64> {
    if !(m >= 0.0) || !m.is_finite() {
        return Err(KljnError::invalid(format!(
            "M must be finite and >= 0, got {m}"
        )));
    }
    Ok(match mode {
        MixingMode::UnitScaled => m,
        MixingMode::JohnsonScaled => m * johnson_rms(r, params)?,
    })
}

/// Eve's copy of `source` built from an already drawn unit-RMS mixing noise.
///
/// `M = 0` returns the source itself when it already sits at the Johnson
/// level of `r` (so Eve's copy is bit-identical), otherwise
/// `scale_to_johnson(source)`; `mixing` is not touched.
pub fn mix_copy(
    source: &NoiseTrace,
    mixing: &NoiseTrace,
    r: f64,
    m: f64,
    mode: MixingMode,
    params: &SystemParams,
) -> Result<NoiseTrace> {
    let gain = mixing_gain(m, mode, r, params)?;
    if gain == 0.0 {
        let target = johnson_rms(r, params)?;
        if (source.rms() / target - 1.0).abs() <= 1e-12 {
            return Ok(source.clone());
        }
        return scale_to_johnson(source, r, params);
    }
    source.ensure_aligned(mixing)?;
    let src_rms = source.rms();
    let mix_rms = mixing.rms();
    if src_rms == 0.0 || mix_rms == 0.0 {
        return Err(KljnError::DegenerateSignal(
            "zero-RMS input to Eve's mixer".into(),
        ));
    }
    let mixed: Vec<f64> = source
        .samples()
        .iter()
        .zip(mixing.samples())
        .map(|(u, x)| u / src_rms + gain * (x / mix_rms))
        .collect();
    let y = NoiseTrace::new(mixed, source.dt(), format!("eve({})", source.label()))?;
    scale_to_johnson(&y, r, params)
}

/// Draws a fresh mixing noise from `rng` and returns Eve's copy of `source`.
pub fn make_eve_copy<R: Rng + ?Sized>(
    source: &NoiseTrace,
    r: f64,
    m: f64,
    mode: MixingMode,
    params: &SystemParams,
    rng: &mut R,
) -> Result<NoiseTrace> {
    mixing_gain(m, mode, r, params)?;
    let mixing = unit_noise(source.len(), source.dt(), params.ensemble, rng)?;
    mix_copy(source, &mixing, r, m, mode, params)
}

/// Eve's knowledge: one correlated copy per generator plus the design
/// correlations for each resistor value.
#[derive(Debug, Clone, PartialEq)]
pub struct EveModel {
    pub m: f64,
    pub mode: MixingMode,
    pub copies: SourceBank,
    pub rho_l: f64,
    pub rho_h: f64,
}

/// `1 / sqrt(1 + gain^2)`.
fn design_rho(gain: f64) -> f64 {
    1.0 / (1.0 + gain * gain).sqrt()
}

impl EveModel {
    /// Builds the copies from pre-drawn mixing noises in [`BANK_SLOTS`] order.
    pub fn from_mixing(
        bank: &SourceBank,
        mixing: &[NoiseTrace; 4],
        m: f64,
        mode: MixingMode,
        params: &SystemParams,
    ) -> Result<Self> {
        let mut copies = Vec::with_capacity(4);
        for (&(side, r), x) in BANK_SLOTS.iter().zip(mixing) {
            let c = mix_copy(bank.get(side, r), x, params.resistance(r), m, mode, params)?;
            copies.push(c.with_label(format!("E{}", slot_label(side, r))));
        }
        Ok(EveModel {
            m,
            mode,
            copies: SourceBank::from_array(copies.try_into().expect("four slots")),
            rho_l: design_rho(mixing_gain(m, mode, params.r_low, params)?),
            rho_h: design_rho(mixing_gain(m, mode, params.r_high, params)?),
        })
    }

    pub fn rho(&self, r: Resistor) -> f64 {
        match r {
            Resistor::L => self.rho_l,
            Resistor::H => self.rho_h,
        }
    }

    /// Replaces Bob's copies with independent Johnson-scaled dummies.
    pub fn with_bob_dummies(&self, dummy_l: NoiseTrace, dummy_h: NoiseTrace) -> Result<Self> {
        self.copies.u_la.ensure_aligned(&dummy_l)?;
        self.copies.u_la.ensure_aligned(&dummy_h)?;
        let mut out = self.clone();
        out.copies.u_lb = dummy_l.with_label("dummy_L");
        out.copies.u_hb = dummy_h.with_label("dummy_H");
        Ok(out)
    }
}

/// Eve's model for trial `trial`; mixing noises come from the `EveMix`
/// streams, disjoint from the generator streams.
pub fn eve_model(
    bank: &SourceBank,
    m: f64,
    mode: MixingMode,
    params: &SystemParams,
    streams: &StreamFactory,
    trial: u64,
) -> Result<EveModel> {
    let mixing = unit_bank(params, streams, Purpose::EveMix, trial)?;
    EveModel::from_mixing(bank, &mixing, m, mode, params)
}
