//! Unbalanced multiphase radial distribution networks: data model, exact and
//! linearized power flow, and the bus-injection / branch-flow semidefinite
//! relaxations of optimal power flow.

pub mod error;
pub mod linalg;
pub mod lpf;
pub mod netmodel;
pub mod powerflow;
pub mod relax;
pub mod synth;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
