//! Heat-bath dynamics under the local-majority / global-minority field.

use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::lattice::{build_neighbor_table, NeighborTable, DEGREE};
use super::rng::{index_below, seeded, unit_f64};
use super::state::{magnetization, SpinState};
use crate::error::{Error, Result};

/// How sites are visited within a sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `N` uniformly random site choices with replacement per sweep.
    #[default]
    RandomSite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub side: usize,
    #[serde(default)]
    pub schedule: Schedule,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, side: usize) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            side,
            schedule: Schedule::RandomSite,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be a finite value > 0 (got {})",
                self.beta
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be a finite value >= 0 (got {})",
                self.alpha
            )));
        }
        if self.side < 3 {
            return Err(Error::InvalidParameter(format!(
                "lattice side must be >= 3 so that the 8 Moore neighbours are distinct (got {})",
                self.side
            )));
        }
        Ok(())
    }

    /// Number of agents, `side^2`.
    pub fn n_agents(&self) -> usize {
        self.side * self.side
    }
}

/// `h_i = sum_{j ~ i} S_j - alpha * S_i * |M|`, with `M` read from the live cache.
#[inline]
pub fn local_field(
    state: &SpinState,
    site: usize,
    params: &ModelParams,
    table: &NeighborTable,
) -> f64 {
    let neighbor_sum: i32 = table
        .neighbors(site)
        .iter()
        .map(|&j| state.get(j as usize) as i32)
        .sum();
    field_value(
        neighbor_sum,
        state.get(site),
        magnetization(state).abs(),
        params.alpha,
    )
}

#[inline(always)]
fn field_value(neighbor_sum: i32, spin: i8, abs_m: f64, alpha: f64) -> f64 {
    neighbor_sum as f64 - alpha * spin as f64 * abs_m
}

/// Heat-bath probability `1 / (1 + exp(-2 beta h))` of the up state.
#[inline]
pub fn flip_probability(h: f64, beta: f64) -> f64 {
    let x = 2.0 * beta * h;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One heat-bath update of `site`. Consumes exactly one uniform draw.
pub fn update_site<R: RngCore + ?Sized>(
    state: &mut SpinState,
    site: usize,
    params: &ModelParams,
    table: &NeighborTable,
    rng: &mut R,
) {
    let p = flip_probability(local_field(state, site, params, table), params.beta);
    let u = unit_f64(rng);
    state.set(site, if u < p { 1 } else { -1 });
}

/// One time step: `N` updates at uniformly drawn sites (site draw, then acceptance draw).
///
/// This is the direct reference path; [`Kernel::sweep`] produces bit-identical
/// results from precomputed probabilities.
pub fn sweep<R: RngCore + ?Sized>(
    state: &mut SpinState,
    params: &ModelParams,
    table: &NeighborTable,
    rng: &mut R,
) {
    let n = state.len();
    for _ in 0..n {
        let site = index_below(rng, n);
        update_site(state, site, params, table, rng);
    }
    debug_assert!(state.cache_consistent(), "spin_sum cache drifted");
}

/// Precomputed acceptance probabilities for one parameter point.
///
/// The field only depends on the neighbour sum, the current spin and `|spin_sum|`,
/// so every probability the dynamics can ask for is tabulated up front using the
/// same arithmetic as [`local_field`] and [`flip_probability`].
#[derive(Debug, Clone)]
pub struct Kernel {
    params: ModelParams,
    table: NeighborTable,
    // [spin_up][neighbor_sum_slot][|spin_sum|], flattened.
    prob_up: Vec<f64>,
    n: usize,
}

impl Kernel {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let table = build_neighbor_table(params.side)?;
        let n = params.n_agents();
        let mut prob_up = Vec::with_capacity(2 * (DEGREE + 1) * (n + 1));
        for spin in [-1i8, 1] {
            for slot in 0..=DEGREE {
                let neighbor_sum = 2 * slot as i32 - DEGREE as i32;
                for abs_sum in 0..=n {
                    let abs_m = (abs_sum as f64 / n as f64).abs();
                    let h = field_value(neighbor_sum, spin, abs_m, params.alpha);
                    prob_up.push(flip_probability(h, params.beta));
                }
            }
        }
        Ok(Self {
            params,
            table,
            prob_up,
            n,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn table(&self) -> &NeighborTable {
        &self.table
    }

    #[inline(always)]
    fn prob(&self, spin: i8, neighbor_sum: i32, abs_sum: usize) -> f64 {
        let spin_idx = (spin > 0) as usize;
        let slot = ((neighbor_sum + DEGREE as i32) / 2) as usize;
        self.prob_up[(spin_idx * (DEGREE + 1) + slot) * (self.n + 1) + abs_sum]
    }

    /// Same draw order and outcome as the free [`sweep`] function.
    pub fn sweep<R: RngCore + ?Sized>(&self, state: &mut SpinState, rng: &mut R) {
        let n = self.n;
        debug_assert_eq!(state.len(), n);
        for _ in 0..n {
            let site = index_below(rng, n);
            let neighbor_sum: i32 = self
                .table
                .neighbors(site)
                .iter()
                .map(|&j| state.get(j as usize) as i32)
                .sum();
            let p = self.prob(state.get(site), neighbor_sum, state.spin_sum().unsigned_abs() as usize);
            let u = unit_f64(rng);
            state.set(site, if u < p { 1 } else { -1 });
        }
        debug_assert!(state.cache_consistent(), "spin_sum cache drifted");
    }

    /// Runs `burn_in` unrecorded sweeps then `n_sweeps` recorded ones,
    /// calling `observe` with the state after each recorded sweep.
    pub fn run_with<R, F>(&self, state: &mut SpinState, rng: &mut R, burn_in: u64, n_sweeps: u64, mut observe: F)
    where
        R: RngCore + ?Sized,
        F: FnMut(u64, &SpinState),
    {
        for _ in 0..burn_in {
            self.sweep(state, rng);
        }
        for t in 0..n_sweeps {
            self.sweep(state, rng);
            observe(t, state);
        }
    }
}

/// Recorded magnetisation path of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ModelParams,
    pub seed: u64,
    pub burn_in: u64,
    pub m_series: Vec<f64>,
}

impl Trajectory {
    /// Writes `sweep,M` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sweep,M")?;
        for (t, m) in self.m_series.iter().enumerate() {
            writeln!(out, "{t},{m:.16e}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Random initial state from `seed`, then `burn_in` + `n_sweeps` sweeps.
pub fn run_trajectory(
    params: &ModelParams,
    n_sweeps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<Trajectory> {
    if n_sweeps == 0 {
        return Err(Error::InvalidParameter("n_sweeps must be > 0".into()));
    }
    let kernel = Kernel::new(*params)?;
    let mut rng = seeded(seed);
    let mut state = SpinState::random(params.n_agents(), &mut rng);
    let mut m_series = Vec::with_capacity(n_sweeps as usize);
    kernel.run_with(&mut state, &mut rng, burn_in, n_sweeps, |_, s| {
        m_series.push(magnetization(s))
    });
    Ok(Trajectory {
        params: *params,
        seed,
        burn_in,
        m_series,
    })
}
