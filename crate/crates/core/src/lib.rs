//! Averaging dynamics and distributed subgradient optimization over random,
//! possibly history-dependent networks.
//!
//! Norms on states are `ℓ∞` throughout.

pub mod chains;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod graph;
pub mod io;
pub mod optimize;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use exec::Execution;
pub use stochastic::{
    apply, compose, diam, make_stochastic, mixing, state_diameter, StateBlock, StochasticMatrix,
};
