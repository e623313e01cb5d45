//! Spin lattice and heat-bath Monte Carlo dynamics.

mod dynamics;
mod lattice;
pub mod rng;
mod state;

pub use dynamics::{
    flip_probability, local_field, run_trajectory, sweep, update_site, Kernel, ModelParams,
    Schedule, Trajectory,
};
pub use lattice::{build_neighbor_table, NeighborTable, DEGREE};
pub use state::{magnetization, SpinState};
