//! Simulation and renewal-period analysis of the Bornholdt spin market model.
//!
//! The pipeline is: [`model`] produces magnetisation trajectories, [`phase`]
//! segments them into ordered/disordered sojourns, [`renewal`] turns sojourns
//! into rates and the renewal period, [`curve`] fits splines over the coupling
//! and locates the critical coupling, and [`sweep`] drives the whole grid.

pub mod analysis;
pub mod curve;
pub mod error;
pub mod model;
pub mod phase;
pub mod renewal;
pub mod sweep;
pub mod validate;

pub use error::{Error, Result};
