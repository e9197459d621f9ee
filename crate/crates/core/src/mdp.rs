//! States, actions, tasks, transitions, and the environment contract.

use std::fmt;
use std::sync::Arc;

use crate::error::{contract, Error, Result};
use crate::rng::{Rng, RngState};

pub type TaskId = usize;

/// Names a state-vector layout. Two states are comparable only when they
/// share a schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Schema {
    pub name: &'static str,
    pub len: usize,
}

/// A fully observed environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec {
    values: Vec<f64>,
    schema: Schema,
}

impl StateVec {
    pub fn new(schema: Schema, values: Vec<f64>) -> Result<Self> {
        if values.len() != schema.len {
            return Err(contract(format!(
                "schema {} expects {} entries, got {}",
                schema.name,
                schema.len,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("state entry {i} of schema {}", schema.name)));
        }
        Ok(Self { values, schema })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    /// Euclidean distance over all entries.
    pub fn distance(&self, other: &StateVec) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

/// Normalised command, every entry in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVec(Vec<f64>);

impl ActionVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(contract(format!("action entry {i} is not finite")));
            }
            if !(-1.0..=1.0).contains(v) {
                return Err(contract(format!("action entry {i} = {v} outside [-1, 1]")));
            }
        }
        Ok(Self(values))
    }

    /// Clips into [-1, 1]; non-finite entries still fail.
    pub fn clipped(values: Vec<f64>) -> Result<Self> {
        Self::new(values.into_iter().map(|v| if v.is_finite() { v.clamp(-1.0, 1.0) } else { v }).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateVec,
    pub action: ActionVec,
    pub reward: f64,
    pub next_state: StateVec,
    pub task_id: TaskId,
}

impl Transition {
    pub fn new(state: StateVec, action: ActionVec, reward: f64, next_state: StateVec, task_id: TaskId) -> Result<Self> {
        if !reward.is_finite() {
            return Err(Error::NonFinite(format!("reward for task {task_id}")));
        }
        Ok(Self { state, action, reward, next_state, task_id })
    }
}

pub type RewardFn = Arc<dyn Fn(&StateVec, &ActionVec, &StateVec) -> f64 + Send + Sync>;
pub type SuccessFn = Arc<dyn Fn(&StateVec) -> bool + Send + Sync>;
pub type InitSampler = Arc<dyn Fn(&mut Rng) -> StateVec + Send + Sync>;

/// One task: reward, success predicate, and the designed default initial
/// state distribution used when no predecessor states are available.
#[derive(Clone)]
pub struct TaskSpec {
    pub task_id: TaskId,
    pub name: String,
    pub reward_fn: RewardFn,
    pub success_fn: SuccessFn,
    pub eval_init: InitSampler,
}

impl TaskSpec {
    pub fn reward(&self, s: &StateVec, a: &ActionVec, s2: &StateVec) -> f64 {
        (self.reward_fn)(s, a, s2)
    }

    pub fn success(&self, s: &StateVec) -> bool {
        (self.success_fn)(s)
    }
}

impl fmt::Debug for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskSpec").field("task_id", &self.task_id).field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedReturnSpec {
    pub gamma: f64,
    pub horizon: usize,
}

impl DiscountedReturnSpec {
    pub fn new(gamma: f64, horizon: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Config(format!("gamma {gamma} outside (0, 1)")));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        Ok(Self { gamma, horizon })
    }
}

impl Default for DiscountedReturnSpec {
    fn default() -> Self {
        Self { gamma: 0.99, horizon: 200 }
    }
}

/// `sum_t gamma^t r_t`; zero for an empty sequence.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    // Horner form, evaluated from the back.
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

/// Uniform-weight aggregate of per-task scores (the fixed task distribution
/// used for reporting one multi-task number).
pub fn uniform_task_average(per_task: &[f64]) -> f64 {
    if per_task.is_empty() {
        0.0
    } else {
        per_task.iter().sum::<f64>() / per_task.len() as f64
    }
}

/// Draws an evaluation start state: uniformly from `reservoir` when it holds
/// anything, otherwise from the task's designed default distribution.
pub fn sample_eval_initial(task: &TaskSpec, reservoir: &[StateVec], rng: &mut Rng) -> StateVec {
    use rand::Rng as _;
    if reservoir.is_empty() {
        (task.eval_init)(rng)
    } else {
        reservoir[rng.random_range(0..reservoir.len())].clone()
    }
}

/// A single-owner, seeded, reset-free environment stream.
pub trait Environment {
    fn schema(&self) -> Schema;
    fn action_dim(&self) -> usize;
    /// Length of [`Environment::features`].
    fn feature_dim(&self) -> usize;
    fn state(&self) -> StateVec;
    /// Overwrites the full state (used to place the initial state and for
    /// evaluation copies; never called by the training loop mid-stream).
    fn set_state(&mut self, state: &StateVec) -> Result<()>;
    /// Advances exactly one step.
    fn step(&mut self, action: &ActionVec) -> Result<StateVec>;
    /// Policy input for a state of this environment's schema.
    fn features(&self, state: &StateVec) -> Vec<f64>;
    /// Number of steps taken since construction.
    fn steps_taken(&self) -> u64;
    /// Records which task executed last, for environments whose state carries it.
    fn set_prev_task(&mut self, _task: TaskId) {}
    fn rng_state(&self) -> RngState;
    fn set_rng(&mut self, rng: Rng);
    fn set_steps_taken(&mut self, steps: u64);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn discounted_return_examples() {
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 0.0), 1.0);
        assert_eq!(discounted_return(&[1.0, 1.0], 0.5), 1.5);
        assert_eq!(discounted_return(&[], 0.9), 0.0);
    }

    #[test]
    fn return_spec_validation() {
        assert!(DiscountedReturnSpec::new(1.0, 10).is_err());
        assert!(DiscountedReturnSpec::new(0.9, 0).is_err());
        assert_eq!(DiscountedReturnSpec::default().horizon, 200);
    }

    #[test]
    fn action_bounds_and_finiteness() {
        assert!(ActionVec::new(vec![0.5, 1.5]).is_err());
        assert!(ActionVec::new(vec![f64::NAN]).is_err());
        assert!(ActionVec::new(vec![-1.0, 1.0]).is_ok());
        assert_eq!(ActionVec::clipped(vec![3.0, -2.0]).unwrap().values(), &[1.0, -1.0]);
        assert!(ActionVec::clipped(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn state_schema_checks() {
        let schema = Schema { name: "t", len: 2 };
        assert!(StateVec::new(schema, vec![1.0]).is_err());
        assert!(StateVec::new(schema, vec![1.0, f64::NAN]).is_err());
        assert!(StateVec::new(schema, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn transition_rejects_non_finite_reward() {
        let schema = Schema { name: "t", len: 1 };
        let s = StateVec::new(schema, vec![0.0]).unwrap();
        assert!(Transition::new(s.clone(), ActionVec::zeros(1), f64::NAN, s, 0).is_err());
    }

    #[test]
    fn eval_initial_prefers_reservoir() {
        let schema = Schema { name: "t", len: 1 };
        let task = TaskSpec {
            task_id: 0,
            name: "t".into(),
            reward_fn: Arc::new(|_, _, _| 0.0),
            success_fn: Arc::new(|_| true),
            eval_init: Arc::new(move |rng| {
                use rand::Rng as _;
                StateVec::new(schema, vec![rng.random_range(10.0..20.0)]).unwrap()
            }),
        };
        let only = StateVec::new(schema, vec![1.25]).unwrap();
        let mut rng = crate::rng::stream(0, "t", 0);
        assert_eq!(sample_eval_initial(&task, std::slice::from_ref(&only), &mut rng), only);
        let d = sample_eval_initial(&task, &[], &mut rng);
        assert!((10.0..20.0).contains(&d.values()[0]));
        let mut r1 = crate::rng::stream(4, "t", 0);
        let mut r2 = crate::rng::stream(4, "t", 0);
        assert_eq!(sample_eval_initial(&task, &[], &mut r1), sample_eval_initial(&task, &[], &mut r2));
    }

    proptest! {
        #[test]
        fn discounted_return_is_linear(rs in prop::collection::vec(-10.0f64..10.0, 0..40), alpha in -5.0f64..5.0, gamma in 0.01f64..0.99) {
            let scaled: Vec<f64> = rs.iter().map(|r| alpha * r).collect();
            let lhs = discounted_return(&scaled, gamma);
            let rhs = alpha * discounted_return(&rs, gamma);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
