//! Simulator for the Kirchhoff-law-Johnson-noise (KLJN) key exchange and for
//! statistical attacks by an eavesdropper holding partially correlated copies
//! of the parties' noise generators.
//!
//! - [`noise`]: band-limited Gaussian noise at Johnson level and Eve's copies.
//! - [`channel`]: the ideal loop, its mean-square levels and resistor inference.
//! - [`attacks`]: the cross-correlation statistic and the four attacks.
//! - [`oracle`]: closed-form predictions used to check the Monte Carlo.
//! - [`experiment`]: seeded sweeps and their reports.
//! - [`presets`]: the published sweeps and their numbers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod noise;
pub mod oracle;
pub mod params;
pub mod presets;
pub mod rng;
pub mod spectrum;
pub mod stats;
pub mod trace;

pub use error::{KljnError, Result};
pub use params::SystemParams;
pub use trace::NoiseTrace;
