use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// Temperature learned toward `target_entropy`.
    Auto,
    /// Constant temperature.
    Fixed(f64),
}

/// Soft actor-critic hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacConfig {
    pub lr: f64,
    pub q_lr: f64,
    pub gamma: f64,
    pub policy_hidden: Vec<usize>,
    pub q_hidden: Vec<usize>,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub reward_scale: f64,
    pub tau: f64,
    pub q_weight_decay: f64,
    pub alpha_mode: AlphaMode,
    pub initial_alpha: f64,
    /// `None` means `-(action dim)`.
    pub target_entropy: Option<f64>,
    /// Gradient updates per environment step.
    pub utd: usize,
    /// Uniform-random actions a task policy takes before its first update.
    pub warmup_steps: usize,
}

impl SacConfig {
    /// Hyperparameters used across all domains in the original experiments.
    pub fn paper() -> Self {
        Self {
            lr: 3e-4,
            q_lr: 3e-4,
            gamma: 0.99,
            policy_hidden: vec![512, 512],
            q_hidden: vec![512, 512],
            batch_size: 1024,
            replay_capacity: 500_000,
            reward_scale: 1.0,
            tau: 5e-3,
            q_weight_decay: 0.0,
            alpha_mode: AlphaMode::Auto,
            initial_alpha: 1.0,
            target_entropy: None,
            utd: 1,
            warmup_steps: 1000,
        }
    }

    /// Laptop-scale profile for single-core acceptance runs.
    pub fn desk() -> Self {
        Self {
            policy_hidden: vec![64, 64],
            q_hidden: vec![64, 64],
            batch_size: 64,
            replay_capacity: 100_000,
            ..Self::paper()
        }
    }

    pub fn target_entropy_for(&self, act_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(act_dim as f64))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr),
            ("q_lr", self.q_lr),
            ("reward_scale", self.reward_scale),
            ("initial_alpha", self.initial_alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if !(self.tau >= 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.q_weight_decay < 0.0 {
            return Err(Error::Config("q_weight_decay must be non-negative".into()));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return Err(Error::Config("batch_size and replay_capacity must be positive".into()));
        }
        if self.policy_hidden.contains(&0) || self.q_hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if let AlphaMode::Fixed(a) = self.alpha_mode {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("fixed alpha {a} must be non-negative")));
            }
        }
        Ok(())
    }
}
