//! Sample moments and the Pearson estimator.

use crate::error::{KljnError, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample skewness and excess kurtosis (population-normalized moments).
pub fn skewness_kurtosis(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Mean-removed Pearson correlation of two equal-length series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(KljnError::invalid(format!(
            "correlation length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(KljnError::invalid("correlation needs at least 2 samples"));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let da = a - mx;
        let db = b - my;
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(KljnError::DegenerateSignal(
            "zero variance after mean removal".into(),
        ));
    }
    // sqrt of the product keeps CCC(x, x) at exactly 1
    let norm = match sxx * syy {
        prod if prod.is_finite() && prod > 0.0 => prod.sqrt(),
        _ => sxx.sqrt() * syy.sqrt(),
    };
    let r = sxy / norm;
    if !r.is_finite() {
        return Err(KljnError::Numeric(format!("correlation evaluated to {r}")));
    }
    Ok(r.clamp(-1.0, 1.0))
}

/// Running sums for a mean and its standard error.
///
/// Values are accumulated in the order given, so callers that feed trials in
/// index order get results independent of how the trials were scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    /// Welford update.
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// NaN when empty.
    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Standard error of the mean; `None` below two samples.
    pub fn standard_error(&self) -> Option<f64> {
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        Some((self.m2.max(0.0) / (n - 1.0) / n).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_identity_and_sign() {
        let x = [1.0, 3.0, -2.0, 0.5, 4.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_constant_is_degenerate() {
        let x = [2.0; 8];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert!(matches!(
            pearson(&x, &y),
            Err(KljnError::DegenerateSignal(_))
        ));
    }

    #[test]
    fn accumulator_matches_two_pass() {
        let v = [0.2, 0.4, 0.1, 0.7, 0.3];
        let mut acc = MeanAccumulator::default();
        v.iter().for_each(|&x| acc.push(x));
        let m = mean(&v);
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!((acc.mean() - m).abs() < 1e-15);
        assert!((acc.standard_error().unwrap() - (var / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_sample_has_no_standard_error() {
        let mut acc = MeanAccumulator::default();
        acc.push(1.0);
        assert_eq!(acc.standard_error(), None);
    }
}
