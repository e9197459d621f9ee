//! Per-task soft actor-critic: twin critics, target critics, entropy
//! temperature, and a FIFO replay buffer.

mod agent;
mod config;
mod replay;

pub use agent::{SacAgent, UpdateStats};
pub use config::{AlphaMode, SacConfig};
pub use replay::{Batch, Featurizer, ReplayBuffer};
