//! Episodic SAC on the point-mass reach task, used as a learning sanity check.

use crate::envs::PointMass;
use crate::error::Result;
use crate::eval::{eval_task, EvalSeed};
use crate::mdp::{ActionVec, Environment, Transition};
use crate::rng::stream;
use crate::sac::{ReplayBuffer, SacAgent, SacConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ReachSchedule {
    pub budget: u64,
    pub episode_len: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Stop early once an evaluation reaches this success rate.
    pub stop_at: Option<f64>,
}

impl Default for ReachSchedule {
    fn default() -> Self {
        Self { budget: 50_000, episode_len: 50, eval_every: 2_500, eval_episodes: 100, stop_at: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachRun {
    /// `(step, success rate)` per evaluation.
    pub evals: Vec<(u64, f64)>,
    pub steps: u64,
}

impl ReachRun {
    pub fn best(&self) -> f64 {
        self.evals.iter().map(|e| e.1).fold(0.0, f64::max)
    }
}

/// Trains one agent with a reset every `episode_len` steps.
pub fn train_reach(seed: u64, sac: &SacConfig, schedule: &ReachSchedule) -> Result<ReachRun> {
    let mut env = PointMass::new(stream(seed, "env", 0));
    let task = PointMass::task();
    let mut agent = SacAgent::new(env.feature_dim(), env.action_dim(), sac, &mut stream(seed, "agent-init", 0))?;
    let mut rng = stream(seed, "agent", 0);
    let probe = env.clone();
    let mut buffer = ReplayBuffer::new(0, sac.replay_capacity, std::sync::Arc::new(move |s| probe.features(s)))?;
    let mut run = ReachRun { evals: Vec::new(), steps: 0 };
    let mut s = env.state();
    for step in 1..=schedule.budget {
        let a = ActionVec::clipped(agent.explore(&env.features(&s), &mut rng)?)?;
        let s2 = env.step(&a)?;
        let r = task.reward(&s, &a, &s2);
        buffer.push(Transition::new(s, a, r, s2.clone(), 0)?)?;
        if agent.warmed_up() {
            for _ in 0..sac.utd {
                agent.update(&buffer, &mut rng)?;
            }
        }
        s = if step % schedule.episode_len == 0 { env.reset() } else { s2 };
        run.steps = step;
        if schedule.eval_every > 0 && step % schedule.eval_every == 0 {
            let report = eval_task(
                |obs: &[f64]| agent.act_deterministic(obs),
                &env,
                &task,
                &[],
                schedule.eval_episodes,
                schedule.episode_len as usize,
                EvalSeed { master: seed, index: step / schedule.eval_every },
                step,
            )?;
            run.evals.push((step, report.success_rate));
            if schedule.stop_at.is_some_and(|t| report.success_rate >= t) {
                break;
            }
        }
    }
    Ok(run)
}
