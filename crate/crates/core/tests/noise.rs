//! Eve's copies hit their design correlation on average.

use kljn_core::channel::{Resistor, Side};
use kljn_core::noise::{make_source_bank, unit_bank, EveModel, MixingMode};
use kljn_core::oracle::rho_from_m;
use kljn_core::rng::{Purpose, StreamFactory};
use kljn_core::stats::{pearson, MeanAccumulator};
use kljn_core::SystemParams;

#[test]
fn copy_correlation_matches_design_over_the_grid() {
    let params = SystemParams::default();
    let streams = StreamFactory::new(31);
    let grid = [0.0, 0.1, 0.5, 1.0, 1.5, 10.0];
    let modes = [MixingMode::JohnsonScaled, MixingMode::UnitScaled];
    let mut acc = vec![MeanAccumulator::default(); grid.len() * modes.len() * 4];
    for trial in 0..1000 {
        let bank = make_source_bank(&params, &streams, trial).unwrap();
        let mixing = unit_bank(&params, &streams, Purpose::EveMix, trial).unwrap();
        let mut k = 0;
        for &m in &grid {
            for mode in modes {
                let eve = EveModel::from_mixing(&bank, &mixing, m, mode, &params).unwrap();
                for side in [Side::Alice, Side::Bob] {
                    for r in Resistor::BOTH {
                        let c = pearson(
                            eve.copies.get(side, r).samples(),
                            bank.get(side, r).samples(),
                        );
                        acc[k].push(c.unwrap());
                        k += 1;
                    }
                }
            }
        }
    }
    let bank = make_source_bank(&params, &streams, 0).unwrap();
    let mut k = 0;
    for &m in &grid {
        for mode in modes {
            for side in [Side::Alice, Side::Bob] {
                for r in Resistor::BOTH {
                    let rho = rho_from_m(m, mode, params.resistance(r), &params).unwrap();
                    let a = &acc[k];
                    let se = a.standard_error().unwrap();
                    // sample correlations carry an O((1 - rho^2)/n) bias near |rho| = 1
                    let n = bank.get(side, r).samples().len() as f64;
                    let tol = 3.0 * se + (1.0 - rho * rho) / n + 1e-12;
                    assert!(
                        (a.mean() - rho).abs() <= tol,
                        "M={m} {mode} {side:?} R_{r}: {} vs {rho} (SE {se})",
                        a.mean()
                    );
                    k += 1;
                }
            }
        }
    }
}
