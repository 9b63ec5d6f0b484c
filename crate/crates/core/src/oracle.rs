//! Closed-form population correlations for every statistic the attacks compute.
//!
//! Each signal is written as a linear combination of orthonormal latent
//! Gaussian sources (the four generators, Eve's four mixing noises and the two
//! unilateral dummies). Voltage and current correlations are inner products of
//! weight vectors; power correlations follow from the zero-mean Gaussian
//! fourth-moment (Isserlis) identities. Nothing here touches sampled data.

use std::collections::BTreeMap;

use crate::attacks::{Channel, Knowledge, ProbeCombo};
use crate::channel::{Resistor, ResistorChoice, Side};
use crate::error::{KljnError, Result};
use crate::noise::MixingMode;
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Latent {
    Source(Side, Resistor),
    /// Eve's independent additive noise for one generator.
    Mix(Side, Resistor),
    /// Unilateral stand-in for one of Bob's generators.
    Dummy(Resistor),
}

/// Weights of a zero-mean signal on the latent unit sources.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearSignal {
    pub coefficients: BTreeMap<Latent, f64>,
}

impl LinearSignal {
    pub fn unit(latent: Latent, weight: f64) -> Self {
        let mut s = LinearSignal::default();
        s.coefficients.insert(latent, weight);
        s
    }

    pub fn weight(&self, latent: Latent) -> f64 {
        self.coefficients.get(&latent).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        LinearSignal {
            coefficients: self.coefficients.iter().map(|(l, w)| (*l, w * k)).collect(),
        }
    }

    pub fn plus(&self, other: &LinearSignal) -> Self {
        let mut out = self.clone();
        for (l, w) in &other.coefficients {
            *out.coefficients.entry(*l).or_insert(0.0) += w;
        }
        out
    }

    pub fn covariance(&self, other: &LinearSignal) -> f64 {
        self.coefficients
            .iter()
            .map(|(l, w)| w * other.weight(*l))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        self.covariance(self)
    }

    pub fn correlation(&self, other: &LinearSignal) -> f64 {
        self.covariance(other) / (self.variance() * other.variance()).sqrt()
    }
}

/// Whose generators drive a loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Driver {
    Parties,
    Eve {
        m: f64,
        mode: MixingMode,
        knowledge: Knowledge,
    },
}

fn sigma(r: f64, params: &SystemParams) -> f64 {
    (4.0 * params.boltzmann * params.t_eff * r * params.bandwidth).sqrt()
}

/// Population correlation between a generator and Eve's copy of it.
pub fn rho_from_m(m: f64, mode: MixingMode, r: f64, params: &SystemParams) -> Result<f64> {
    if !(m >= 0.0) || !m.is_finite() {
        return Err(KljnError::invalid(format!(
            "M must be finite and >= 0, got {m}"
        )));
    }
    let gain = match mode {
        MixingMode::UnitScaled => m,
        MixingMode::JohnsonScaled => m * sigma(r, params),
    };
    Ok(1.0 / (1.0 + gain * gain).sqrt())
}

/// Latent decomposition of Eve's copy of one generator.
fn eve_copy(
    side: Side,
    r: Resistor,
    m: f64,
    mode: MixingMode,
    params: &SystemParams,
) -> Result<LinearSignal> {
    let s = sigma(params.resistance(r), params);
    let rho = rho_from_m(m, mode, params.resistance(r), params)?;
    let mut sig = LinearSignal::unit(Latent::Source(side, r), s * rho);
    let rest = (1.0 - rho * rho).max(0.0).sqrt();
    if rest > 0.0 {
        sig.coefficients.insert(Latent::Mix(side, r), s * rest);
    }
    Ok(sig)
}

fn generator(
    side: Side,
    r: Resistor,
    driver: Driver,
    params: &SystemParams,
) -> Result<LinearSignal> {
    match driver {
        Driver::Parties => Ok(LinearSignal::unit(
            Latent::Source(side, r),
            sigma(params.resistance(r), params),
        )),
        Driver::Eve {
            knowledge: Knowledge::UnilateralAlice,
            ..
        } if side == Side::Bob => Ok(LinearSignal::unit(
            Latent::Dummy(r),
            sigma(params.resistance(r), params),
        )),
        Driver::Eve { m, mode, .. } => eve_copy(side, r, m, mode, params),
    }
}

/// Wire voltage or current of `combo` as a latent weight vector.
pub fn wire_as_linear(
    combo: ResistorChoice,
    driver: Driver,
    channel: Channel,
    params: &SystemParams,
) -> Result<LinearSignal> {
    let a = generator(Side::Alice, combo.alice, driver, params)?;
    let b = generator(Side::Bob, combo.bob, driver, params)?;
    let (ra, rb) = combo.resistances(params);
    let total = ra + rb;
    match channel {
        Channel::Voltage => Ok(a.scaled(rb / total).plus(&b.scaled(ra / total))),
        Channel::Current => Ok(a.scaled(1.0 / total).plus(&b.scaled(-1.0 / total))),
        Channel::Power | Channel::Source => Err(KljnError::invalid(format!(
            "{channel} is not a linear wire signal"
        ))),
    }
}

/// Correlation of the products `x1 y1` and `x2 y2` of zero-mean jointly
/// Gaussian signals.
pub fn product_correlation(
    x1: &LinearSignal,
    y1: &LinearSignal,
    x2: &LinearSignal,
    y2: &LinearSignal,
) -> f64 {
    let c = |a: &LinearSignal, b: &LinearSignal| a.covariance(b);
    let cov = c(x1, x2) * c(y1, y2) + c(x1, y2) * c(y1, x2);
    let v1 = c(x1, x1) * c(y1, y1) + c(x1, y1).powi(2);
    let v2 = c(x2, x2) * c(y2, y2) + c(x2, y2).powi(2);
    cov / (v1 * v2).sqrt()
}

/// Population CCC between the measured channel of `truth` and Eve's probe.
pub fn predict_ccc(
    truth: ResistorChoice,
    probe: ProbeCombo,
    channel: Channel,
    knowledge: Knowledge,
    m: f64,
    mode: MixingMode,
    params: &SystemParams,
) -> Result<f64> {
    params.validate()?;
    let eve = Driver::Eve { m, mode, knowledge };
    match channel {
        Channel::Voltage | Channel::Current => {
            let t = wire_as_linear(truth, Driver::Parties, channel, params)?;
            let e = wire_as_linear(probe, eve, channel, params)?;
            Ok(t.correlation(&e))
        }
        Channel::Power => {
            let tu = wire_as_linear(truth, Driver::Parties, Channel::Voltage, params)?;
            let ti = wire_as_linear(truth, Driver::Parties, Channel::Current, params)?;
            let eu = wire_as_linear(probe, eve, Channel::Voltage, params)?;
            let ei = wire_as_linear(probe, eve, Channel::Current, params)?;
            Ok(product_correlation(&tu, &ti, &eu, &ei))
        }
        Channel::Source => Err(KljnError::invalid(
            "use predict_source_ccc for source statistics",
        )),
    }
}

/// Population CCC between the `side` reconstruction with `r_hyp` and Eve's
/// copy of that side's `against` generator.
pub fn predict_source_ccc(
    truth: ResistorChoice,
    side: Side,
    r_hyp: f64,
    against: Resistor,
    m: f64,
    mode: MixingMode,
    params: &SystemParams,
) -> Result<f64> {
    params.validate()?;
    if !(r_hyp > 0.0) {
        return Err(KljnError::invalid(format!(
            "hypothesis resistance must be > 0, got {r_hyp}"
        )));
    }
    let u = wire_as_linear(truth, Driver::Parties, Channel::Voltage, params)?;
    let i = wire_as_linear(truth, Driver::Parties, Channel::Current, params)?;
    let sign = match side {
        Side::Alice => 1.0,
        Side::Bob => -1.0,
    };
    let rec = u.plus(&i.scaled(sign * r_hyp));
    let copy = eve_copy(side, against, m, mode, params)?;
    Ok(rec.correlation(&copy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const J: MixingMode = MixingMode::JohnsonScaled;
    const BI: Knowledge = Knowledge::Bilateral;
    const UNI: Knowledge = Knowledge::UnilateralAlice;

    fn p() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn linear_weights() {
        let lh =
            wire_as_linear(ResistorChoice::LH, Driver::Parties, Channel::Voltage, &p()).unwrap();
        // 16.613 * 100/110 and 52.536 * 10/110
        assert!((lh.weight(Latent::Source(Side::Alice, Resistor::L)) - 15.10).abs() < 5e-3);
        assert!((lh.weight(Latent::Source(Side::Bob, Resistor::H)) - 4.776).abs() < 5e-3);
        let hh =
            wire_as_linear(ResistorChoice::HH, Driver::Parties, Channel::Current, &p()).unwrap();
        assert!((hh.weight(Latent::Source(Side::Alice, Resistor::H)) - 2.627e-4).abs() < 1e-7);
        assert!((hh.weight(Latent::Source(Side::Bob, Resistor::H)) + 2.627e-4).abs() < 1e-7);
        let eve = Driver::Eve {
            m: 0.0,
            mode: J,
            knowledge: BI,
        };
        let e = wire_as_linear(ResistorChoice::LH, eve, Channel::Voltage, &p()).unwrap();
        assert_eq!(e, lh);
        assert!(wire_as_linear(ResistorChoice::LH, eve, Channel::Power, &p()).is_err());
    }

    #[test]
    fn bilateral_m0_row() {
        let v = |probe, ch| predict_ccc(ResistorChoice::LH, probe, ch, BI, 0.0, J, &p()).unwrap();
        assert!((v(ProbeCombo::LH, Channel::Voltage) - 1.0).abs() < 1e-12);
        assert!((v(ProbeCombo::HH, Channel::Voltage) - 0.21320).abs() < 1e-4);
        assert!((v(ProbeCombo::LL, Channel::Voltage) - 0.67420).abs() < 1e-4);
        assert_eq!(v(ProbeCombo::HL, Channel::Voltage), 0.0);
        assert!((v(ProbeCombo::HH, Channel::Current) - 0.67420).abs() < 1e-4);
        assert!((v(ProbeCombo::LL, Channel::Current) - 0.21320).abs() < 1e-4);
        assert!((v(ProbeCombo::HH, Channel::Power) - 0.2874).abs() < 1e-4);
        assert!((v(ProbeCombo::LH, Channel::Power) - 1.0).abs() < 1e-12);
        assert_eq!(v(ProbeCombo::HL, Channel::Power), 0.0);
    }

    #[test]
    fn m0_row_close_to_published_values() {
        // Published M = 0 row (voltage, current, power).
        let published = [
            (ProbeCombo::HH, [0.213960, 0.674280, 0.286570]),
            (ProbeCombo::LL, [0.675060, 0.212460, 0.285320]),
            (ProbeCombo::HL, [0.002088, 0.000370, 0.000157]),
            (ProbeCombo::LH, [1.0, 1.0, 1.0]),
        ];
        for (probe, vals) in published {
            for (ch, want) in Channel::WIRE.into_iter().zip(vals) {
                let got = predict_ccc(ResistorChoice::LH, probe, ch, BI, 0.0, J, &p()).unwrap();
                assert!(
                    (got - want).abs() <= 0.0025,
                    "{probe} {ch}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn unilateral_lh_voltage() {
        let v = predict_ccc(
            ResistorChoice::LH,
            ProbeCombo::LH,
            Channel::Voltage,
            UNI,
            0.0,
            J,
            &p(),
        )
        .unwrap();
        // R_H/(R_L+R_H) * sigma_L weight, squared over the wire variance: 10/11
        assert!((v - 0.9091).abs() < 1e-4);
        let hh = predict_ccc(
            ResistorChoice::LH,
            ProbeCombo::HH,
            Channel::Voltage,
            UNI,
            0.0,
            J,
            &p(),
        )
        .unwrap();
        assert_eq!(hh, 0.0);
    }

    #[test]
    fn source_predictions() {
        let s = |side, against, m| {
            predict_source_ccc(ResistorChoice::LH, side, p().r_low, against, m, J, &p()).unwrap()
        };
        assert!((s(Side::Alice, Resistor::L, 0.0) - 1.0).abs() < 1e-12);
        assert_eq!(s(Side::Alice, Resistor::H, 0.0), 0.0);
        assert!((s(Side::Bob, Resistor::H, 0.0) - 0.5750).abs() < 1e-4);
        assert!((s(Side::Alice, Resistor::L, 1.0) - 0.06013).abs() < 1e-4);
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho_from_m(0.0, J, 10e3, &p()).unwrap(), 1.0);
        assert!((rho_from_m(1.0, J, 10e3, &p()).unwrap() - 1.0 / 277f64.sqrt()).abs() < 1e-12);
        assert!((rho_from_m(1.0, J, 10e3, &p()).unwrap() - 0.06013).abs() < 5e-5);
        assert!(
            (rho_from_m(1.0, MixingMode::UnitScaled, 1.0, &p()).unwrap()
                - std::f64::consts::FRAC_1_SQRT_2)
                .abs()
                < 1e-12
        );
        assert!(rho_from_m(-1.0, J, 10e3, &p()).is_err());
    }

    fn combo() -> impl Strategy<Value = ResistorChoice> {
        prop::sample::select(ResistorChoice::ALL.to_vec())
    }

    fn grid_m() -> impl Strategy<Value = f64> {
        prop::sample::select(vec![0.0, 0.1, 0.5, 1.0, 1.5, 10.0])
    }

    proptest! {
        #[test]
        fn predictions_are_bounded(
            truth in combo(), probe in combo(), m in grid_m(),
            ch in prop::sample::select(Channel::WIRE.to_vec()),
            kn in prop::sample::select(vec![BI, UNI]),
            mode in prop::sample::select(vec![J, MixingMode::UnitScaled]),
        ) {
            let v = predict_ccc(truth, probe, ch, kn, m, mode, &p()).unwrap();
            prop_assert!(v.abs() <= 1.0 + 1e-12);
            let shares = [Side::Alice, Side::Bob].iter().any(|&s| truth.get(s) == probe.get(s)
                && !(s == Side::Bob && kn == UNI));
            if !shares {
                prop_assert_eq!(v, 0.0);
            }
        }

        #[test]
        fn m0_bilateral_is_symmetric(truth in combo(), probe in combo(),
            ch in prop::sample::select(Channel::WIRE.to_vec())) {
            let a = predict_ccc(truth, probe, ch, BI, 0.0, J, &p()).unwrap();
            let b = predict_ccc(probe, truth, ch, BI, 0.0, J, &p()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            if truth == probe {
                prop_assert!((a - 1.0).abs() < 1e-12);
            }
        }
    }
}
