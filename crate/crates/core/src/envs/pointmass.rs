//! Planar point mass that must reach a fixed goal; a small check that SAC learns at all.

use std::sync::Arc;

use rand::Rng as _;

use crate::error::{contract, Result};
use crate::mdp::{ActionVec, Environment, Schema, StateVec, TaskSpec};
use crate::rng::{Rng, RngState};

pub const POINT_SCHEMA: Schema = Schema { name: "pointmass", len: 2 };
pub const POINT_GOAL: [f64; 2] = [0.3, 0.2];
pub const POINT_STEP: f64 = 0.1;
pub const POINT_SUCCESS_RADIUS: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct PointMass {
    pos: [f64; 2],
    rng: Rng,
    steps: u64,
}

fn goal_distance(s: &StateVec) -> f64 {
    let v = s.values();
    ((v[0] - POINT_GOAL[0]).powi(2) + (v[1] - POINT_GOAL[1]).powi(2)).sqrt()
}

impl PointMass {
    pub fn new(mut rng: Rng) -> Self {
        let pos = Self::random_position(&mut rng);
        Self { pos, rng, steps: 0 }
    }

    fn random_position(rng: &mut Rng) -> [f64; 2] {
        [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
    }

    /// Moves to a fresh uniform start position drawn from the environment's stream.
    pub fn reset(&mut self) -> StateVec {
        self.pos = Self::random_position(&mut self.rng);
        self.state()
    }

    /// The reach task: negative distance to the goal, success within 5 cm.
    pub fn task() -> TaskSpec {
        TaskSpec {
            task_id: 0,
            name: "reach".into(),
            reward_fn: Arc::new(|_s: &StateVec, _a: &ActionVec, s2: &StateVec| -goal_distance(s2)),
            success_fn: Arc::new(|s: &StateVec| goal_distance(s) < POINT_SUCCESS_RADIUS),
            eval_init: Arc::new(|rng: &mut Rng| {
                StateVec::new(POINT_SCHEMA, Self::random_position(rng).to_vec()).expect("finite start")
            }),
        }
    }
}

impl Environment for PointMass {
    fn schema(&self) -> Schema {
        POINT_SCHEMA
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn feature_dim(&self) -> usize {
        4
    }

    fn state(&self) -> StateVec {
        StateVec::new(POINT_SCHEMA, self.pos.to_vec()).expect("positions stay finite")
    }

    fn set_state(&mut self, state: &StateVec) -> Result<()> {
        if state.schema() != POINT_SCHEMA {
            return Err(contract("not a point-mass state"));
        }
        self.pos = [state.values()[0], state.values()[1]];
        Ok(())
    }

    fn step(&mut self, action: &ActionVec) -> Result<StateVec> {
        if action.len() != 2 {
            return Err(contract(format!("point mass takes 2 action entries, got {}", action.len())));
        }
        let a = action.values();
        for (p, da) in self.pos.iter_mut().zip(a) {
            *p = (*p + POINT_STEP * da).clamp(-1.0, 1.0);
        }
        self.steps += 1;
        Ok(self.state())
    }

    fn features(&self, state: &StateVec) -> Vec<f64> {
        let v = state.values();
        vec![v[0], v[1], v[0] - POINT_GOAL[0], v[1] - POINT_GOAL[1]]
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn rng_state(&self) -> RngState {
        RngState::capture(&self.rng)
    }

    fn set_rng(&mut self, rng: Rng) {
        self.rng = rng;
    }

    fn set_steps_taken(&mut self, steps: u64) {
        self.steps = steps;
    }
}
