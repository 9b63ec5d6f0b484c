//! Physical constants and the parameter set shared by every simulation stage.

use serde::{Deserialize, Serialize};

use crate::channel::Resistor;
use crate::error::{KljnError, Result};

/// Boltzmann constant as printed in the reference tables (J/K).
pub const BOLTZMANN_TABLE: f64 = 1.38e-23;
/// CODATA 2018 exact value (J/K).
pub const BOLTZMANN_CODATA: f64 = 1.380649e-23;

/// Number of raw Gaussian series averaged into one noise record.
pub const DEFAULT_ENSEMBLE: usize = 10;

/// Parameters of one KLJN loop and its noise generators.
///
/// The sampling step is always derived from the bandwidth through
/// `tau = 1 / (2 * bandwidth)` and is never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Low resistance, ohm.
    pub r_low: f64,
    /// High resistance, ohm.
    pub r_high: f64,
    /// Publicly agreed effective noise temperature, K.
    pub t_eff: f64,
    /// Noise bandwidth, Hz.
    pub bandwidth: f64,
    /// Boltzmann constant, J/K.
    pub boltzmann: f64,
    /// Samples per bit-exchange period.
    pub n_steps: usize,
    /// Raw series averaged per generated noise record.
    pub ensemble: usize,
}

impl Default for SystemParams {
    /// 10 kOhm / 100 kOhm, T_eff = 1e18 K, 500 Hz band, 1000 steps.
    fn default() -> Self {
        SystemParams {
            r_low: 10e3,
            r_high: 100e3,
            t_eff: 1e18,
            bandwidth: 500.0,
            boltzmann: BOLTZMANN_TABLE,
            n_steps: 1000,
            ensemble: DEFAULT_ENSEMBLE,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.r_low,
            self.r_high,
            self.t_eff,
            self.bandwidth,
            self.boltzmann,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(KljnError::invalid("system parameters must be finite"));
        }
        if !(self.r_low > 0.0) {
            return Err(KljnError::invalid(format!(
                "r_low must be > 0, got {}",
                self.r_low
            )));
        }
        if !(self.r_high > self.r_low) {
            return Err(KljnError::invalid(format!(
                "r_high ({}) must exceed r_low ({})",
                self.r_high, self.r_low
            )));
        }
        if !(self.t_eff > 0.0) {
            return Err(KljnError::invalid("t_eff must be > 0"));
        }
        if !(self.bandwidth > 0.0) {
            return Err(KljnError::invalid("bandwidth must be > 0"));
        }
        if !(self.boltzmann > 0.0) {
            return Err(KljnError::invalid("boltzmann constant must be > 0"));
        }
        if self.n_steps < 2 {
            return Err(KljnError::invalid(format!(
                "n_steps must be >= 2, got {}",
                self.n_steps
            )));
        }
        if self.ensemble < 1 {
            return Err(KljnError::invalid("ensemble must be >= 1"));
        }
        Ok(())
    }

    /// Sampling step from the Nyquist condition.
    pub fn time_step(&self) -> f64 {
        1.0 / (2.0 * self.bandwidth)
    }

    pub fn resistance(&self, r: Resistor) -> f64 {
        match r {
            Resistor::L => self.r_low,
            Resistor::H => self.r_high,
        }
    }

    /// `4 k T_eff Delta f_B`, the mean square per ohm.
    pub fn noise_power_per_ohm(&self) -> f64 {
        4.0 * self.boltzmann * self.t_eff * self.bandwidth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_step_is_one_millisecond() {
        let p = SystemParams::default();
        p.validate().unwrap();
        assert_eq!(p.time_step() * 2.0 * p.bandwidth, 1.0);
        assert!((p.time_step() - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn rejects_inverted_resistors() {
        let p = SystemParams {
            r_high: 5e3,
            ..SystemParams::default()
        };
        assert!(matches!(p.validate(), Err(KljnError::InvalidArgument(_))));
    }

    #[test]
    fn rejects_short_period() {
        let p = SystemParams {
            n_steps: 1,
            ..SystemParams::default()
        };
        assert!(p.validate().is_err());
    }
}
