//! The four published sweeps as named configurations, with the published
//! numbers they are checked against.

use std::fmt::Write as _;

use crate::attacks::Channel;
use crate::error::{KljnError, Result};
use crate::experiment::{format_stat, oracle_comparison, ExperimentConfig, SweepReport};

/// Mixing multipliers of every published table.
pub const M_GRID: [f64; 6] = [0.0, 0.1, 0.5, 1.0, 1.5, 10.0];

#[derive(Debug)]
pub struct RefTable {
    pub number: u8,
    pub name: &'static str,
    config_toml: &'static str,
    pub grid: [f64; 6],
    /// Channel whose p column is gated by `tables --check`.
    pub gated: Channel,
    /// Published p per channel, one value per grid point.
    pub p: &'static [(Channel, [f64; 6])],
    /// Published mean CCC per channel, indexed `[M][probe]` in report probe order.
    pub ccc: &'static [(Channel, [&'static [f64]; 6])],
}

impl RefTable {
    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(self.config_toml).expect("bundled preset parses")
    }

    pub fn published_p(&self, channel: Channel) -> Option<&[f64; 6]> {
        self.p.iter().find(|(c, _)| *c == channel).map(|(_, v)| v)
    }
}

use Channel::{Current as I, Power as P, Source as S, Voltage as U};

pub static TABLES: [RefTable; 4] = [
    RefTable {
        number: 1,
        name: "table1",
        config_toml: include_str!("../presets/table1.toml"),
        grid: M_GRID,
        gated: U,
        p: &[
            (U, [1.0, 1.0, 0.998, 0.904, 0.827, 0.558]),
            (I, [1.0, 1.0, 0.781, 0.651, 0.6, 0.528]),
            (P, [1.0, 0.995, 0.550, 0.544, 0.524, 0.518]),
        ],
        // probes HH, LL, HL, LH
        ccc: &[
            (
                U,
                [
                    &[0.213960, 0.675060, 0.002088, 1.0],
                    &[0.039932, 0.347620, 0.000239, 0.485410],
                    &[0.009068, 0.080356, -0.000313, 0.112630],
                    &[0.004431, 0.040189, -0.000166, 0.056232],
                    &[0.001820, 0.027865, -0.000490, 0.038744],
                    &[0.000908, 0.003666, -0.000805, 0.006126],
                ],
            ),
            (
                I,
                [
                    &[0.674280, 0.212460, 0.000370, 1.0],
                    &[0.109800, 0.125890, -0.000177, 0.216720],
                    &[0.026372, 0.026207, 0.001804, 0.044934],
                    &[0.012502, 0.012589, -0.000217, 0.022431],
                    &[0.008615, 0.007432, 0.000293, 0.014521],
                    &[0.000263, 0.001263, -0.000011, 0.002058],
                ],
            ),
            (
                P,
                [
                    &[0.286570, 0.285320, 0.000157, 1.0],
                    &[0.009254, 0.076979, -0.000988, 0.114570],
                    &[-0.001256, 0.003574, -0.000401, 0.003888],
                    &[-0.000065, 0.000728, -0.000023, 0.001271],
                    &[-0.000281, -0.001454, -0.000130, 0.001894],
                    &[0.000477, 0.001151, -0.000055, 0.001359],
                ],
            ),
        ],
    },
    RefTable {
        number: 2,
        name: "table2",
        config_toml: include_str!("../presets/table2.toml"),
        grid: M_GRID,
        gated: S,
        p: &[(S, [1.0, 0.992, 0.669, 0.569, 0.547, 0.501])],
        // probes alice:R_L, alice:R_H, bob:R_L, bob:R_H
        ccc: &[(
            S,
            [
                &[1.0, -0.015600, 0.00028951, 0.560400],
                &[0.515040, 0.008990, 0.002046, 0.131430],
                &[0.118910, -0.028922, 0.000017, 0.029605],
                &[0.060229, 0.009445, -0.000460, -0.011328],
                &[0.048146, 0.039420, 0.000012, 0.026396],
                &[0.007059, -0.001521, 0.000348, -0.011921],
            ],
        )],
    },
    RefTable {
        number: 3,
        name: "table3",
        config_toml: include_str!("../presets/table3.toml"),
        grid: M_GRID,
        gated: U,
        p: &[
            (U, [1.0, 1.0, 0.994, 0.886, 0.805, 0.539]),
            (I, [0.98, 0.863, 0.581, 0.542, 0.523, 0.514]),
            (P, [0.992, 0.801, 0.518, 0.517, 0.508, 0.501]),
        ],
        ccc: &[
            (
                U,
                [
                    &[-0.000023, 0.673820, -0.001374, 0.909330],
                    &[-0.001021, 0.379860, 0.000501, 0.468500],
                    &[-0.000207, 0.079899, -0.000998, 0.108640],
                    &[0.000288, 0.040892, 0.000892, 0.054347],
                    &[-0.000615, 0.027794, -0.000503, 0.037697],
                    &[-0.000042, 0.004576, 0.000462, 0.005711],
                ],
            ),
            (
                I,
                [
                    &[0.000145, 0.090397, -0.000015, 0.211650],
                    &[0.000957, 0.048214, 0.000236, 0.110610],
                    &[0.000175, 0.001031, 0.009610, 0.024430],
                    &[0.000091, 0.012783, -0.000116, 0.057347],
                    &[-0.000169, 0.008971, 0.000944, 0.026552],
                    &[-0.000376, 0.000405, -0.000483, 0.000949],
                ],
            ),
            (
                P,
                [
                    &[0.000005, 0.16462, -0.000032, 0.285270],
                    &[-0.000044, 0.043738, 0.001270, 0.076680],
                    &[-0.0013809, 0.000677, -0.0011319, 0.002906],
                    &[0.001396, -0.000151, 0.001294, 0.003950],
                    &[-0.000136, 0.000731, 0.000212, 0.001249],
                    &[-0.001033, 0.002124, 0.000807, 0.002155],
                ],
            ),
        ],
    },
    RefTable {
        number: 4,
        name: "table4",
        config_toml: include_str!("../presets/table4.toml"),
        grid: M_GRID,
        gated: S,
        p: &[(S, [1.0, 1.0, 0.999, 0.907, 0.804, 0.546])],
        // probes alice:R_L, alice:R_H
        ccc: &[(
            S,
            [
                &[1.0, -0.015600],
                &[0.515220, 0.008990],
                &[0.118910, -0.028922],
                &[0.060047, 0.009445],
                &[0.048146, 0.040953],
                &[0.005654, -0.001521],
            ],
        )],
    },
];

pub fn table(number: u8) -> Option<&'static RefTable> {
    TABLES.iter().find(|t| t.number == number)
}

pub const PRESET_NAMES: [&str; 4] = ["table1", "table2", "table3", "table4"];

/// Looks a preset up by name (`table1`..`table4`).
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    TABLES
        .iter()
        .find(|t| t.name == name)
        .map(RefTable::config)
        .ok_or_else(|| {
            KljnError::invalid(format!(
                "unknown preset '{name}' (expected one of {})",
                PRESET_NAMES.join(", ")
            ))
        })
}

pub const EXPECTED_COLUMNS: &str = "M,channel,probe,published_ccc,oracle_ccc,published_p";

/// Published and closed-form values for every row of a preset's report.
pub fn expected_values_csv(t: &RefTable) -> Result<String> {
    let config = t.config();
    let probes = config.probes();
    // An empty report with the right row layout lets the oracle fill it in.
    let mut cfg = config.clone();
    cfg.n_trials = 1;
    let skeleton = SweepReport {
        version: String::new(),
        scoring: String::new(),
        config: cfg.clone(),
        rows: skeleton_rows(&cfg, &probes),
        summary: Vec::new(),
    };
    let oracle = oracle_comparison(&skeleton)?;
    let mut out = format!("# {}\n{EXPECTED_COLUMNS}\n", t.name);
    let mut k = 0;
    for (mi, &m) in t.grid.iter().enumerate() {
        for channel in config.effective_channels() {
            let published = t
                .ccc
                .iter()
                .find(|(c, _)| *c == channel)
                .map(|(_, rows)| rows[mi])
                .ok_or_else(|| KljnError::invalid(format!("{} lacks {channel}", t.name)))?;
            let p = t.published_p(channel).map(|v| v[mi]);
            for (pi, probe) in probes.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{m},{channel},{probe},{},{},{}",
                    published[pi],
                    format_stat(oracle[k].predicted),
                    p.map(|v| v.to_string()).unwrap_or_default()
                );
                k += 1;
            }
        }
    }
    Ok(out)
}

fn skeleton_rows(cfg: &ExperimentConfig, probes: &[String]) -> Vec<crate::experiment::SweepRow> {
    let mut rows = Vec::new();
    for &m in &cfg.m_grid {
        for channel in cfg.effective_channels() {
            for probe in probes {
                rows.push(crate::experiment::SweepRow {
                    attack: cfg.attack,
                    knowledge: cfg.attack.knowledge(),
                    channel,
                    mode: cfg.mode,
                    m,
                    truth: cfg.truth.to_string(),
                    probe: probe.clone(),
                    mean_ccc: 0.0,
                    se_ccc: None,
                    p: 0.0,
                    n_trials: cfg.n_trials,
                    n_steps: cfg.n_steps,
                    master_seed: cfg.master_seed,
                });
            }
        }
    }
    rows
}
