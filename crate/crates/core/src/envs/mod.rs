//! Kinematic surrogate domains and a point-mass reach environment.

pub mod manip;
pub mod pointmass;
pub mod tasks;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use manip::{step_kinematics, ArenaConfig, ManipAction, ManipState, MANIP_SCHEMA, PINCER_SCHEMA};
pub use pointmass::PointMass;
pub use tasks::{designed_initial, table_start, task_reward, task_success, TaskKind};

use crate::error::{contract, Error, Result};
use crate::mdp::{ActionVec, Environment, Schema, StateVec, TaskId, TaskSpec};
use crate::rng::{stream, Rng, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Inhand,
    Pipe,
    Lightbulb,
    Basketball,
    Pincer,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Inhand, Family::Pipe, Family::Lightbulb, Family::Basketball, Family::Pincer];

    pub fn name(self) -> &'static str {
        match self {
            Family::Inhand => "inhand",
            Family::Pipe => "pipe",
            Family::Lightbulb => "lightbulb",
            Family::Basketball => "basketball",
            Family::Pincer => "pincer",
        }
    }

    /// Ordered task list; task ids index into it.
    pub fn tasks(self) -> &'static [TaskKind] {
        use TaskKind::*;
        match self {
            Family::Inhand => &[Recenter, Lift, Flipup, Reorient, Perturb],
            Family::Pipe => &[Recenter, PipeLift, Insert1, Insert2, Remove, Perturb],
            Family::Lightbulb => &[Recenter, Lift, Flipup, BulbInsert, Perturb],
            Family::Basketball => &[Recenter, Lift, Dunk, Perturb],
            Family::Pincer => &[Grasp, FillDrawer, PullDrawer, Perturb],
        }
    }

    pub fn task_count(self) -> usize {
        self.tasks().len()
    }

    /// The task whose mastery is the objective of a run.
    pub fn forward_task(self) -> TaskId {
        match self {
            Family::Inhand | Family::Pipe | Family::Lightbulb => 3,
            Family::Basketball => 2,
            Family::Pincer => 1,
        }
    }

    pub fn task_id(self, name: &str) -> Option<TaskId> {
        self.tasks().iter().position(|k| k.name() == name)
    }

    pub fn perturb_task(self) -> TaskId {
        self.task_id("perturb").expect("every family has a perturb task")
    }

    pub fn action_dim(self) -> usize {
        match self {
            Family::Inhand => 6,
            Family::Lightbulb => 5,
            Family::Pipe | Family::Basketball => 4,
            Family::Pincer => 3,
        }
    }

    pub fn schema(self) -> Schema {
        if self == Family::Pincer {
            PINCER_SCHEMA
        } else {
            MANIP_SCHEMA
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown domain family {s:?}")))
    }
}

/// Number of policy input features of a manipulation state.
pub const MANIP_FEATURES: usize = 13;

/// Policy inputs: the state without `prev_task`, the wrist angle relative to
/// upright, and the object position relative to the hand.
pub fn manip_features(s: &ManipState, cfg: &ArenaConfig) -> Vec<f64> {
    vec![
        s.hand_xyz[0],
        s.hand_xyz[1],
        s.hand_xyz[2],
        s.wrist_theta_x - cfg.theta_x_goal,
        s.closure,
        s.obj_xyz[0],
        s.obj_xyz[1],
        s.obj_xyz[2],
        s.obj_theta_z,
        if s.attached { 1.0 } else { 0.0 },
        s.obj_xyz[0] - s.hand_xyz[0],
        s.obj_xyz[1] - s.hand_xyz[1],
        s.obj_xyz[2] - s.hand_xyz[2],
    ]
}

#[derive(Debug, Clone)]
pub struct ManipEnv {
    family: Family,
    cfg: ArenaConfig,
    state: ManipState,
    rng: Rng,
    steps: u64,
}

impl ManipEnv {
    /// Starts from the run-start distribution (object at a random table position).
    pub fn new(family: Family, cfg: ArenaConfig, mut rng: Rng) -> Self {
        let state = table_start(family, &cfg, Some(&mut rng));
        Self { family, cfg, state, rng, steps: 0 }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn config(&self) -> &ArenaConfig {
        &self.cfg
    }

    pub fn manip_state(&self) -> &ManipState {
        &self.state
    }

    pub fn set_manip_state(&mut self, state: ManipState) {
        self.state = state;
    }
}

impl Environment for ManipEnv {
    fn schema(&self) -> Schema {
        self.family.schema()
    }

    fn action_dim(&self) -> usize {
        self.family.action_dim()
    }

    fn feature_dim(&self) -> usize {
        MANIP_FEATURES
    }

    fn state(&self) -> StateVec {
        self.state.to_vec(self.family)
    }

    fn set_state(&mut self, state: &StateVec) -> Result<()> {
        if state.schema() != self.schema() {
            return Err(contract(format!("expected a {} state, got {}", self.schema().name, state.schema().name)));
        }
        self.state = ManipState::from_vec(state)?;
        Ok(())
    }

    fn step(&mut self, action: &ActionVec) -> Result<StateVec> {
        let a = ManipAction::from_slice(self.family, action.values())?;
        self.state = step_kinematics(self.family, &self.state, &a, &self.cfg, &mut self.rng);
        self.steps += 1;
        Ok(self.state())
    }

    fn features(&self, state: &StateVec) -> Vec<f64> {
        match ManipState::from_vec(state) {
            Ok(s) => manip_features(&s, &self.cfg),
            Err(_) => vec![f64::NAN; MANIP_FEATURES],
        }
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn set_prev_task(&mut self, task: TaskId) {
        self.state.prev_task = task;
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

/// Builds the [`TaskSpec`] list for a family.
pub fn task_specs(family: Family, cfg: &ArenaConfig) -> Vec<TaskSpec> {
    family
        .tasks()
        .iter()
        .enumerate()
        .map(|(task_id, &kind)| {
            let (rc, sc, ic) = (cfg.clone(), cfg.clone(), cfg.clone());
            TaskSpec {
                task_id,
                name: kind.name().to_string(),
                reward_fn: Arc::new(move |_s: &StateVec, _a: &ActionVec, s2: &StateVec| {
                    ManipState::from_vec(s2).map_or(f64::NAN, |m| tasks::reward_of(kind, &m, &rc))
                }),
                success_fn: Arc::new(move |s: &StateVec| {
                    ManipState::from_vec(s).is_ok_and(|m| tasks::success_of(kind, &m, &sc))
                }),
                eval_init: Arc::new(move |rng: &mut Rng| designed_initial(family, kind, &ic, Some(rng)).to_vec(family)),
            }
        })
        .collect()
}

/// An environment with its task list.
pub struct Domain {
    pub family: Family,
    pub env: ManipEnv,
    pub tasks: Vec<TaskSpec>,
}

impl Domain {
    pub fn forward_task(&self) -> TaskId {
        self.family.forward_task()
    }
}

pub fn make_domain(family: &str, cfg: ArenaConfig, seed: u64) -> Result<Domain> {
    let family: Family = family.parse()?;
    cfg.validate()?;
    let tasks = task_specs(family, &cfg);
    let env = ManipEnv::new(family, cfg, stream(seed, "env", 0));
    Ok(Domain { family, env, tasks })
}
