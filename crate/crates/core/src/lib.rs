//! Reset-free multi-task reinforcement learning.

pub mod envs;
pub mod error;
pub mod eval;
pub mod mdp;
pub mod nn;
pub mod orchestrator;
pub mod rng;
pub mod sac;
pub mod snapshot;
pub mod taskgraph;

pub use error::{Error, Result};
