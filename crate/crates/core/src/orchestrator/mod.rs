//! The reset-free training loop, its baselines, and the novelty reward.

pub mod episodic;
pub mod rnd;
pub mod state;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use rnd::{RndConfig, RndPair, RunningStats};

use crate::envs::{designed_initial, manip_features, Domain, ManipEnv};
use crate::error::{contract, Error, Result};
use crate::eval::{eval_task, EvalReport, EvalSeed, StateReservoir, TransitionLogEntry, RESERVOIR_CAPACITY};
use crate::mdp::{ActionVec, Environment, StateVec, TaskId, TaskSpec, Transition};
use crate::rng::{stream, Rng};
use crate::sac::{Featurizer, ReplayBuffer, SacAgent, SacConfig, UpdateStats};
use crate::taskgraph::{predecessors, GraphThresholds, TaskGraph, TaskSelector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Mtrf,
    Sac,
    ResetController,
    PerturbationController,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::Mtrf, Algorithm::Sac, Algorithm::ResetController, Algorithm::PerturbationController];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mtrf => "mtrf",
            Algorithm::Sac => "sac",
            Algorithm::ResetController => "reset_controller",
            Algorithm::PerturbationController => "perturbation_controller",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// What a slot's agent is rewarded for.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardSource {
    Task(TaskId),
    /// Normalised novelty bonus from the shared [`RndPair`].
    Novelty,
    /// Negative distance between the next state's features and these.
    ReturnTo(Vec<f64>),
}

pub type ScriptedPolicy = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// An acting policy: a learning agent or a fixed script.
#[derive(Clone)]
pub enum Learner {
    Sac(Box<SacAgent>),
    Scripted(ScriptedPolicy),
}

impl fmt::Debug for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Learner::Sac(a) => f.debug_tuple("Sac").field(a).finish(),
            Learner::Scripted(_) => f.write_str("Scripted"),
        }
    }
}

impl Learner {
    pub fn explore(&mut self, obs: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        match self {
            Learner::Sac(a) => a.explore(obs, rng),
            Learner::Scripted(p) => Ok(p(obs)),
        }
    }

    /// Deterministic action used for evaluation.
    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Learner::Sac(a) => a.act_deterministic(obs),
            Learner::Scripted(p) => Ok(p(obs)),
        }
    }

    /// Runs `utd` gradient steps once warmup is over; scripts never train.
    fn train(&mut self, buffer: &ReplayBuffer, rng: &mut Rng) -> Result<Option<UpdateStats>> {
        match self {
            Learner::Sac(a) if a.warmed_up() && !buffer.is_empty() => {
                let mut last = None;
                for _ in 0..a.config().utd {
                    last = Some(a.update(buffer, rng)?);
                }
                if !a.is_finite() {
                    return Err(Error::NonFinite("agent parameters".into()));
                }
                Ok(last)
            }
            _ => Ok(None),
        }
    }

    pub fn as_sac(&self) -> Option<&SacAgent> {
        match self {
            Learner::Sac(a) => Some(a),
            Learner::Scripted(_) => None,
        }
    }

    pub fn as_sac_mut(&mut self) -> Option<&mut SacAgent> {
        match self {
            Learner::Sac(a) => Some(a),
            Learner::Scripted(_) => None,
        }
    }
}

/// One policy with its reward, buffer, and random stream.
#[derive(Debug, Clone)]
pub struct Slot {
    /// Id logged in transitions and stored in the buffer.
    pub task_id: TaskId,
    pub name: String,
    pub source: RewardSource,
    pub learner: Learner,
    pub buffer: ReplayBuffer,
    pub rng: Rng,
}

/// How the next slot is chosen at each window boundary.
pub enum Schedule {
    /// Query a task graph on the current state; the result names a slot by task id.
    Graph(Box<dyn TaskSelector + Send + Sync>),
    /// Cycle through the slots in order.
    Alternate,
    /// Always the first slot.
    Constant,
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Graph(_) => "Graph",
            Schedule::Alternate => "Alternate",
            Schedule::Constant => "Constant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    /// Steps between task switches.
    pub switch_period: usize,
    /// Steps between forward-task evaluations; 0 disables them.
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub eval_horizon: usize,
    pub reservoir_capacity: usize,
    pub rnd: RndConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            switch_period: 100,
            eval_every: 10_000,
            eval_episodes: 50,
            eval_horizon: 200,
            reservoir_capacity: RESERVOIR_CAPACITY,
            rnd: RndConfig::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.switch_period == 0 {
            return Err(Error::Config("switch_period must be positive".into()));
        }
        if !self.eval_every.is_multiple_of(self.switch_period as u64) {
            return Err(Error::Config("eval_every must be a multiple of switch_period".into()));
        }
        if self.eval_every > 0 && (self.eval_episodes == 0 || self.eval_horizon == 0) {
            return Err(Error::Config("eval_episodes and eval_horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Event kind of a metrics row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowEvent {
    TrainWindow,
    Eval,
}

impl RowEvent {
    pub fn name(self) -> &'static str {
        match self {
            RowEvent::TrainWindow => "train_window",
            RowEvent::Eval => "eval",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub algorithm: Algorithm,
    pub task_id: TaskId,
    pub event: RowEvent,
    pub reward_sum: f64,
    pub success_rate: f64,
    pub loss_actor: Option<f64>,
    pub loss_critic: Option<f64>,
    pub alpha: Option<f64>,
}

/// Everything one window produced.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutcome {
    pub log: TransitionLogEntry,
    pub row: MetricsRow,
    pub eval: Option<EvalReport>,
    pub eval_row: Option<MetricsRow>,
}

/// Training state shared by the reset-free algorithm and its baselines.
#[derive(Debug)]
pub struct Trainer<E: Environment + Clone> {
    pub algorithm: Algorithm,
    pub cfg: TrainerConfig,
    pub seed: u64,
    pub env: E,
    /// The environment's task list; rewards and success tests come from here.
    pub tasks: Vec<TaskSpec>,
    pub forward_task: TaskId,
    pub slots: Vec<Slot>,
    pub schedule: Schedule,
    pub rnd: Option<RndPair>,
    /// Successful window-end states, one reservoir per task.
    pub reservoirs: Vec<StateReservoir>,
    pub reservoir_rng: Rng,
    /// Edges used to pick evaluation start states.
    pub predecessors: Vec<Vec<TaskId>>,
    pub total_steps: u64,
    pub windows: u64,
    pub evals: u64,
    /// Task id of the last executed window.
    pub prev_task: TaskId,
    pub transition_log: Vec<TransitionLogEntry>,
}

fn featurizer_for<E: Environment + Clone + Send + Sync + 'static>(env: &E) -> Featurizer {
    let env = env.clone();
    Arc::new(move |s: &StateVec| env.features(s))
}

impl<E: Environment + Clone + Send + Sync + 'static> Trainer<E> {
    /// Assembles a trainer from explicit slots. `tasks` must cover every
    /// `RewardSource::Task` id and `forward_task`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        algorithm: Algorithm,
        cfg: TrainerConfig,
        seed: u64,
        env: E,
        tasks: Vec<TaskSpec>,
        forward_task: TaskId,
        slots: Vec<Slot>,
        schedule: Schedule,
        predecessors: Vec<Vec<TaskId>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if slots.is_empty() {
            return Err(contract("a trainer needs at least one slot"));
        }
        if forward_task >= tasks.len() || predecessors.len() != tasks.len() {
            return Err(contract("forward task and predecessor table must match the task list"));
        }
        for slot in &slots {
            if let RewardSource::Task(t) = slot.source {
                if t >= tasks.len() {
                    return Err(contract(format!("slot {} rewards unknown task {t}", slot.name)));
                }
            }
        }
        let needs_rnd = slots.iter().any(|s| s.source == RewardSource::Novelty);
        let rnd = if needs_rnd {
            Some(RndPair::new(env.feature_dim(), &cfg.rnd, &mut stream(seed, "rnd-init", 0))?)
        } else {
            None
        };
        let mut env = env;
        env.set_prev_task(forward_task);
        Ok(Self {
            algorithm,
            reservoirs: (0..tasks.len()).map(|_| StateReservoir::new(cfg.reservoir_capacity)).collect(),
            reservoir_rng: stream(seed, "reservoir", 0),
            cfg,
            seed,
            env,
            tasks,
            forward_task,
            slots,
            schedule,
            rnd,
            predecessors,
            total_steps: 0,
            windows: 0,
            evals: 0,
            prev_task: forward_task,
            transition_log: Vec::new(),
        })
    }

    /// Builds a slot holding a fresh SAC agent.
    pub fn sac_slot(
        env: &E,
        index: u64,
        task_id: TaskId,
        name: &str,
        source: RewardSource,
        sac: &SacConfig,
        seed: u64,
    ) -> Result<Slot> {
        let mut init = stream(seed, "agent-init", index);
        let agent = SacAgent::new(env.feature_dim(), env.action_dim(), sac, &mut init)?;
        Ok(Slot {
            task_id,
            name: name.to_string(),
            source,
            learner: Learner::Sac(Box::new(agent)),
            buffer: ReplayBuffer::new(task_id, sac.replay_capacity, featurizer_for(env))?,
            rng: stream(seed, "agent", index),
        })
    }

    /// Builds a slot driven by a fixed script.
    pub fn scripted_slot(
        env: &E,
        index: u64,
        task_id: TaskId,
        name: &str,
        policy: ScriptedPolicy,
        seed: u64,
    ) -> Result<Slot> {
        Ok(Slot {
            task_id,
            name: name.to_string(),
            source: RewardSource::Task(task_id),
            learner: Learner::Scripted(policy),
            buffer: ReplayBuffer::new(task_id, 1 << 16, featurizer_for(env))?,
            rng: stream(seed, "agent", index),
        })
    }

    pub fn slot_for_task(&self, task: TaskId) -> Option<usize> {
        self.slots.iter().position(|s| s.task_id == task)
    }

    /// The slot whose buffer receives forward-task rewards.
    pub fn forward_slot(&self) -> usize {
        self.slots
            .iter()
            .position(|s| s.source == RewardSource::Task(self.forward_task))
            .expect("every trainer has a forward slot")
    }

    fn choose_slot(&self) -> Result<usize> {
        match &self.schedule {
            Schedule::Graph(g) => {
                let task = g.select(&self.env.state())?;
                self.slot_for_task(task).ok_or_else(|| contract(format!("graph chose task {task} without a slot")))
            }
            Schedule::Alternate => Ok((self.windows % self.slots.len() as u64) as usize),
            Schedule::Constant => Ok(0),
        }
    }

    fn reward(&mut self, source: &RewardSource, s: &StateVec, a: &ActionVec, s2: &StateVec) -> Result<f64> {
        match source {
            RewardSource::Task(t) => Ok(self.tasks[*t].reward(s, a, s2)),
            RewardSource::Novelty => {
                let x = self.env.features(s2);
                self.rnd.as_mut().expect("novelty slots come with an RND pair").bonus(&x)
            }
            RewardSource::ReturnTo(target) => {
                let x = self.env.features(s2);
                Ok(-x.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            }
        }
    }

    /// Executes one switch period: choose a slot, act and learn for T steps,
    /// store successful end states, and evaluate when the cadence is due.
    pub fn run_window(&mut self) -> Result<WindowOutcome> {
        let start = self.total_steps;
        let idx = self.choose_slot()?;
        let task_id = self.slots[idx].task_id;
        let log = TransitionLogEntry { step: start, from_task: self.prev_task, to_task: task_id };
        self.transition_log.push(log);

        let source = self.slots[idx].source.clone();
        let mut reward_sum = 0.0;
        let (mut actor, mut critic, mut alpha, mut updates) = (0.0, 0.0, None, 0usize);
        for _ in 0..self.cfg.switch_period {
            let s = self.env.state();
            let obs = self.env.features(&s);
            let slot = &mut self.slots[idx];
            let a = ActionVec::clipped(slot.learner.explore(&obs, &mut slot.rng)?)?;
            let s2 = self.env.step(&a)?;
            let r = self.reward(&source, &s, &a, &s2)?;
            if !r.is_finite() {
                return Err(Error::NonFinite(format!("reward at step {}", self.total_steps)));
            }
            reward_sum += r;
            let slot = &mut self.slots[idx];
            slot.buffer.push(Transition::new(s, a, r, s2, task_id)?)?;
            if let Some(stats) = slot.learner.train(&slot.buffer, &mut slot.rng)? {
                actor += stats.actor_loss;
                critic += stats.critic_loss;
                alpha = Some(stats.alpha);
                updates += 1;
            }
            self.total_steps += 1;
        }

        let end = self.env.state();
        let success = match source {
            RewardSource::Task(t) => self.tasks[t].success(&end),
            _ => false,
        };
        if let (true, RewardSource::Task(t)) = (success, &source) {
            self.reservoirs[*t].offer(end, &mut self.reservoir_rng);
        }
        self.env.set_prev_task(task_id);
        self.prev_task = task_id;
        self.windows += 1;

        let mean = |x: f64| (updates > 0).then(|| x / updates as f64);
        let row = MetricsRow {
            step: self.total_steps,
            algorithm: self.algorithm,
            task_id,
            event: RowEvent::TrainWindow,
            reward_sum,
            success_rate: if success { 1.0 } else { 0.0 },
            loss_actor: mean(actor),
            loss_critic: mean(critic),
            alpha,
        };
        let (eval, eval_row) = if self.cfg.eval_every > 0 && self.total_steps.is_multiple_of(self.cfg.eval_every) {
            let report = self.evaluate_forward(self.cfg.eval_episodes)?;
            let row = self.eval_row(&report);
            (Some(report), Some(row))
        } else {
            (None, None)
        };
        Ok(WindowOutcome { log, row, eval, eval_row })
    }

    fn eval_row(&self, r: &EvalReport) -> MetricsRow {
        MetricsRow {
            step: r.step_of_training,
            algorithm: self.algorithm,
            task_id: r.task_id,
            event: RowEvent::Eval,
            reward_sum: r.mean_return,
            success_rate: r.success_rate,
            loss_actor: None,
            loss_critic: None,
            alpha: None,
        }
    }

    /// Start states for evaluating `task`: the union of its predecessors' reservoirs.
    pub fn eval_starts(&self, task: TaskId) -> Vec<StateVec> {
        self.predecessors[task].iter().flat_map(|&p| self.reservoirs[p].items().iter().cloned()).collect()
    }

    /// Evaluates the forward slot's policy on the forward task; consumes one evaluation index.
    pub fn evaluate_forward(&mut self, episodes: usize) -> Result<EvalReport> {
        let index = self.evals;
        self.evals += 1;
        self.evaluate(self.forward_slot(), self.forward_task, episodes, index)
    }

    /// Evaluates `slot`'s policy on `task` without touching training state.
    pub fn evaluate(&self, slot: usize, task: TaskId, episodes: usize, index: u64) -> Result<EvalReport> {
        let learner = &self.slots[slot].learner;
        let starts = self.eval_starts(task);
        eval_task(
            |obs: &[f64]| learner.act(obs),
            &self.env,
            &self.tasks[task],
            &starts,
            episodes,
            self.cfg.eval_horizon,
            EvalSeed { master: self.seed, index },
            self.total_steps,
        )
    }

    /// Runs whole windows until `budget` total steps, handing each outcome to `sink`.
    pub fn run(&mut self, budget: u64, mut sink: impl FnMut(&Self, &WindowOutcome) -> Result<()>) -> Result<()> {
        if !budget.is_multiple_of(self.cfg.switch_period as u64) {
            return Err(Error::Config(format!(
                "budget {budget} is not a multiple of the switch period {}",
                self.cfg.switch_period
            )));
        }
        while self.total_steps < budget {
            let out = self.run_window()?;
            sink(self, &out)?;
        }
        Ok(())
    }

    /// Total transitions stored across all buffers, counting overwritten ones.
    pub fn pushes(&self) -> u64 {
        self.slots.iter().map(|s| s.buffer.pushes()).sum()
    }
}

/// Builds one of the four algorithms on a manipulation domain.
pub fn build_trainer(
    domain: Domain,
    algorithm: Algorithm,
    sac: &SacConfig,
    cfg: TrainerConfig,
    thresholds: GraphThresholds,
    seed: u64,
) -> Result<Trainer<ManipEnv>> {
    let Domain { family, env, tasks } = domain;
    let fwd = family.forward_task();
    let names: Vec<&str> = family.tasks().iter().map(|k| k.name()).collect();
    let k = tasks.len();
    let mut slots = Vec::new();
    let schedule = match algorithm {
        Algorithm::Mtrf => {
            for (i, name) in names.iter().enumerate() {
                let source = if i == family.perturb_task() { RewardSource::Novelty } else { RewardSource::Task(i) };
                slots.push(Trainer::sac_slot(&env, i as u64, i, name, source, sac, seed)?);
            }
            let graph = TaskGraph::new(family, thresholds, env.config().clone())?;
            Schedule::Graph(Box::new(graph))
        }
        Algorithm::Sac => {
            slots.push(Trainer::sac_slot(&env, 0, fwd, names[fwd], RewardSource::Task(fwd), sac, seed)?);
            Schedule::Constant
        }
        Algorithm::ResetController => {
            let home = designed_initial(family, family.tasks()[fwd], env.config(), None);
            let target = manip_features(&home, env.config());
            slots.push(Trainer::sac_slot(&env, 0, fwd, names[fwd], RewardSource::Task(fwd), sac, seed)?);
            slots.push(Trainer::sac_slot(&env, 1, k, "reset", RewardSource::ReturnTo(target), sac, seed)?);
            Schedule::Alternate
        }
        Algorithm::PerturbationController => {
            let p = family.perturb_task();
            slots.push(Trainer::sac_slot(&env, 0, fwd, names[fwd], RewardSource::Task(fwd), sac, seed)?);
            slots.push(Trainer::sac_slot(&env, 1, p, names[p], RewardSource::Novelty, sac, seed)?);
            Schedule::Alternate
        }
    };
    // Baselines have no upstream tasks, so they are evaluated from the designed defaults.
    let preds =
        (0..k).map(|t| if algorithm == Algorithm::Mtrf { predecessors(family, t) } else { Vec::new() }).collect();
    Trainer::from_parts(algorithm, cfg, seed, env, tasks, fwd, slots, schedule, preds)
}
