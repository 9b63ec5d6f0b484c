//! Uniformly sampled voltage (or current, or power) records.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{KljnError, Result};

const TRACE_MAGIC: &str = "# kljn-trace v1";

/// A uniformly sampled time series with its sample spacing and a free-text label.
///
/// All samples are finite, there are at least two of them, and `dt > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    samples: Vec<f64>,
    dt: f64,
    label: String,
}

impl NoiseTrace {
    pub fn new(samples: Vec<f64>, dt: f64, label: impl Into<String>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(KljnError::invalid(format!(
                "trace needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(KljnError::invalid(format!(
                "dt must be finite and > 0, got {dt}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(KljnError::Numeric(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(NoiseTrace {
            samples,
            dt,
            label: label.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.mean_square().sqrt()
    }

    /// Multiplies every sample by `factor`, keeping spacing and label.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        NoiseTrace::new(
            self.samples.iter().map(|v| v * factor).collect(),
            self.dt,
            self.label.clone(),
        )
    }

    /// Checks that `other` has the same length and spacing.
    pub fn ensure_aligned(&self, other: &NoiseTrace) -> Result<()> {
        if self.len() != other.len() {
            return Err(KljnError::invalid(format!(
                "length mismatch: {} ({}) vs {} ({})",
                self.len(),
                self.label,
                other.len(),
                other.label
            )));
        }
        if self.dt != other.dt {
            return Err(KljnError::invalid(format!(
                "sample spacing mismatch: {} vs {}",
                self.dt, other.dt
            )));
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 26 + 64);
        out.push_str(TRACE_MAGIC);
        out.push('\n');
        let _ = writeln!(out, "# dt_s={:?}", self.dt);
        let _ = writeln!(out, "# label={}", self.label.replace('\n', " "));
        out.push_str("value_volts\n");
        for v in &self.samples {
            let _ = writeln!(out, "{v:.16e}");
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(TRACE_MAGIC) {
            return Err(KljnError::Parse(format!("missing '{TRACE_MAGIC}' header")));
        }
        let mut dt = None;
        let mut label = String::new();
        let mut samples = Vec::new();
        let mut seen_column = false;
        for (n, line) in lines.enumerate() {
            let line = line.trim_end();
            if let Some(rest) = line.strip_prefix("# dt_s=") {
                dt = Some(
                    rest.trim()
                        .parse::<f64>()
                        .map_err(|e| KljnError::Parse(format!("bad dt_s '{rest}': {e}")))?,
                );
            } else if let Some(rest) = line.strip_prefix("# label=") {
                label = rest.to_string();
            } else if line.starts_with('#') || line.is_empty() {
                continue;
            } else if !seen_column {
                if line != "value_volts" {
                    return Err(KljnError::Parse(format!(
                        "expected column 'value_volts', got '{line}'"
                    )));
                }
                seen_column = true;
            } else {
                samples.push(line.parse::<f64>().map_err(|e| {
                    KljnError::Parse(format!("line {}: bad sample '{line}': {e}", n + 2))
                })?);
            }
        }
        let dt = dt.ok_or_else(|| KljnError::Parse("missing '# dt_s=' header".into()))?;
        NoiseTrace::new(samples, dt, label)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| KljnError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KljnError::io(path, e))?;
        NoiseTrace::from_csv_str(&text)
    }
}
