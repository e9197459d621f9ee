//! Tanh-squashed diagonal Gaussian policy head.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Guard inside `log(1 - tanh(u)^2 + SQUASH_EPS)`.
pub const SQUASH_EPS: f64 = 1e-6;
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Mean and clamped log standard deviation of the pre-squash Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHead {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianHead {
    /// Splits a `2 * act_dim` network output into mean and clamped log-std.
    pub fn from_output(output: &[f64]) -> Self {
        let d = output.len() / 2;
        Self {
            mean: output[..d].to_vec(),
            log_std: output[d..2 * d].iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Squashed mean action, used for evaluation rollouts.
    pub fn mode(&self) -> Vec<f64> {
        self.mean.iter().map(|m| m.tanh()).collect()
    }

    /// Draws `a = tanh(mean + std * xi)` and its log-density.
    pub fn sample(&self, rng: &mut Rng) -> (Vec<f64>, f64) {
        let noise: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_with_noise(&noise)
    }

    pub fn sample_with_noise(&self, noise: &[f64]) -> (Vec<f64>, f64) {
        let mut action = Vec::with_capacity(self.dim());
        let mut log_prob = 0.0;
        for ((&m, &ls), &xi) in self.mean.iter().zip(&self.log_std).zip(noise) {
            let a = (m + ls.exp() * xi).tanh();
            log_prob += -0.5 * xi * xi - ls - HALF_LN_2PI - (1.0 - a * a + SQUASH_EPS).ln();
            action.push(a);
        }
        (action, log_prob)
    }

    /// Log-density of a squashed action `a` in (-1, 1)^d.
    pub fn log_prob(&self, action: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(action)
            .map(|((&m, &ls), &a)| {
                let u = a.atanh();
                let xi = (u - m) / ls.exp();
                -0.5 * xi * xi - ls - HALF_LN_2PI - (1.0 - a * a + SQUASH_EPS).ln()
            })
            .sum()
    }
}
