//! Experiment grid over coupling, temperature, lattice size and seeds.
//!
//! Runs are enumerated in `(side, beta, alpha, seed_slot)` order. The seed of
//! run `k` is the `k`-th output of a SplitMix64 stream started at the master
//! seed, `mix64(master + k * 0x9E3779B97F4A7C15)`, which is a bijection of `k`.

mod collect;
mod exec;
mod store;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use collect::{collect, Curve, CurvePointSummary, DetectorChoice, OmittedPoint, Statistic};
pub use exec::{execute, execute_sequential, run_point, ExecSummary, RecordSink};
#[cfg(feature = "parallel")]
pub use exec::execute_parallel;
pub use store::{ResultStore, RunKey, RunOutcome, RunRecord, VariantOutcome, CSV_HEADER};

use crate::error::{Error, Result};
use crate::model::rng::mix64;
use crate::model::ModelParams;
use crate::phase::DetectorConfig;

/// Build tag stored with every record.
pub const ENGINE_VERSION: &str = concat!(
    "spinmarket-core/",
    env!("CARGO_PKG_VERSION"),
    "+pcg64mcg-heatbath-1"
);

/// Increment of the SplitMix64 stream.
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Canonical 12-decimal rendering used in grouping keys.
pub fn canonical_key(x: f64) -> String {
    format!("{x:.12}")
}

fn default_alphas() -> Vec<f64> {
    vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
}
fn default_betas() -> Vec<f64> {
    vec![0.2, 0.25, 0.333333333333, 0.5]
}
fn default_sides() -> Vec<usize> {
    vec![16, 32]
}
fn default_seeds_per_point() -> usize {
    5
}
fn default_n_sweeps() -> u64 {
    1_000_000
}
fn default_burn_in() -> u64 {
    10_000
}
fn default_master_seed() -> u64 {
    20_060_217
}
fn default_sensitivity_delta() -> f64 {
    0.05
}

/// JSON sweep configuration. Missing fields take the reference grid defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_sides")]
    pub sides: Vec<usize>,
    #[serde(default = "default_seeds_per_point")]
    pub seeds_per_point: usize,
    #[serde(default = "default_n_sweeps")]
    pub n_sweeps: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    /// Threshold shift for the detector-sensitivity variants.
    #[serde(default = "default_sensitivity_delta")]
    pub sensitivity_delta: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alphas: default_alphas(),
            betas: default_betas(),
            sides: default_sides(),
            seeds_per_point: default_seeds_per_point(),
            n_sweeps: default_n_sweeps(),
            burn_in: default_burn_in(),
            detector: DetectorConfig::default(),
            master_seed: default_master_seed(),
            sensitivity_delta: default_sensitivity_delta(),
        }
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        fn increasing<T: PartialOrd>(name: &str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} must not be empty")));
            }
            if v.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be strictly increasing"
                )));
            }
            Ok(())
        }
        increasing("alphas", &self.alphas)?;
        increasing("betas", &self.betas)?;
        increasing("sides", &self.sides)?;
        if self.seeds_per_point == 0 {
            return Err(Error::InvalidConfig("seeds_per_point must be >= 1".into()));
        }
        if self.n_sweeps == 0 {
            return Err(Error::InvalidConfig("n_sweeps must be >= 1".into()));
        }
        if !(self.sensitivity_delta >= 0.0 && self.sensitivity_delta < 1.0) {
            return Err(Error::InvalidConfig(
                "sensitivity_delta must lie in [0, 1)".into(),
            ));
        }
        self.detector.validate()?;
        for &side in &self.sides {
            for &beta in &self.betas {
                for &alpha in &self.alphas {
                    ModelParams::new(alpha, beta, side)
                        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                }
            }
        }
        let keys: std::collections::BTreeSet<_> =
            self.betas.iter().map(|&b| canonical_key(b)).collect();
        if keys.len() != self.betas.len() {
            return Err(Error::InvalidConfig(
                "betas collide at 12-decimal precision".into(),
            ));
        }
        Ok(())
    }
}

/// One enumerated simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_index: u64,
    pub side: usize,
    pub beta: f64,
    pub alpha: f64,
    pub seed_slot: usize,
    pub seed: u64,
}

impl RunSpec {
    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.alpha, self.beta, self.side).expect("validated by plan")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub config: SweepConfig,
    pub runs: Vec<RunSpec>,
}

impl SweepPlan {
    pub fn key_of(&self, run: &RunSpec) -> RunKey {
        RunKey::new(run.side, run.beta, run.alpha, run.seed, self.config.n_sweeps, self.config.burn_in)
    }

    /// Base detector followed by the valid threshold-shifted variants.
    pub fn sensitivity_detectors(&self) -> Vec<DetectorConfig> {
        let d = self.config.sensitivity_delta;
        if d == 0.0 {
            return Vec::new();
        }
        [(d, 0.0), (-d, 0.0), (0.0, d), (0.0, -d)]
            .into_iter()
            .filter_map(|(dh, dl)| self.config.detector.shifted(dh, dl).ok())
            .collect()
    }
}

/// Seed of run `run_index` under `master_seed`.
pub fn run_seed(master_seed: u64, run_index: u64) -> u64 {
    mix64(master_seed.wrapping_add(run_index.wrapping_mul(GOLDEN_GAMMA)))
}

/// Enumerates every run of the grid.
pub fn plan(config: &SweepConfig) -> Result<SweepPlan> {
    config.validate()?;
    let mut runs = Vec::with_capacity(
        config.sides.len() * config.betas.len() * config.alphas.len() * config.seeds_per_point,
    );
    for &side in &config.sides {
        for &beta in &config.betas {
            for &alpha in &config.alphas {
                for seed_slot in 0..config.seeds_per_point {
                    let run_index = runs.len() as u64;
                    runs.push(RunSpec {
                        run_index,
                        side,
                        beta,
                        alpha,
                        seed_slot,
                        seed: run_seed(config.master_seed, run_index),
                    });
                }
            }
        }
    }
    Ok(SweepPlan {
        config: config.clone(),
        runs,
    })
}
