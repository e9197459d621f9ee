//! Evaluation from predecessor states, reservoirs, and task-frequency counts.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::error::{contract, Result};
use crate::mdp::{sample_eval_initial, ActionVec, Environment, StateVec, TaskId, TaskSpec};
use crate::rng::{stream, Rng};

pub const RESERVOIR_CAPACITY: usize = 1024;

/// Bounded uniform sample of states, filled by reservoir sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct StateReservoir {
    capacity: usize,
    items: Vec<StateVec>,
    seen: u64,
}

impl StateReservoir {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, items: Vec::new(), seen: 0 }
    }

    pub fn from_parts(capacity: usize, items: Vec<StateVec>, seen: u64) -> Result<Self> {
        if items.len() > capacity || (items.len() as u64) > seen {
            return Err(contract("reservoir holds more states than its capacity or history allows"));
        }
        Ok(Self { capacity, items, seen })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn items(&self) -> &[StateVec] {
        &self.items
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Offers one state; every state offered so far stays with equal probability.
    pub fn offer(&mut self, state: StateVec, rng: &mut Rng) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(state);
        } else if self.capacity > 0 {
            let j = rng.random_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.items[j as usize] = state;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task_id: TaskId,
    pub n_episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub step_of_training: u64,
}

/// Where an evaluation draws its randomness from.
#[derive(Debug, Clone, Copy)]
pub struct EvalSeed {
    pub master: u64,
    /// Distinguishes evaluations of the same run (e.g. the evaluation count).
    pub index: u64,
}

/// Rolls out `policy` for `n` episodes of `horizon` steps from start states
/// drawn from `starts` (falling back to the task's designed distribution),
/// each in a fresh copy of `env`. An episode succeeds if the task's success
/// predicate holds at any step, including the start.
#[allow(clippy::too_many_arguments)]
pub fn eval_task<E, P>(
    policy: P,
    env: &E,
    task: &TaskSpec,
    starts: &[StateVec],
    n: usize,
    horizon: usize,
    seed: EvalSeed,
    step_of_training: u64,
) -> Result<EvalReport>
where
    E: Environment + Clone,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if n == 0 {
        return Err(contract("evaluation needs at least one episode"));
    }
    let mut init_rng = stream(seed.master, "eval-init", seed.index);
    let mut successes = 0;
    let mut total_return = 0.0;
    for episode in 0..n {
        let start = sample_eval_initial(task, starts, &mut init_rng);
        let mut env = env.clone();
        env.set_state(&start)?;
        env.set_rng(stream(seed.master, "eval-env", seed.index.wrapping_mul(1 << 20).wrapping_add(episode as u64)));
        let mut s = start;
        let mut success = task.success(&s);
        let mut ret = 0.0;
        for _ in 0..horizon {
            let a = ActionVec::clipped(policy(&env.features(&s))?)?;
            let s2 = env.step(&a)?;
            ret += task.reward(&s, &a, &s2);
            success |= task.success(&s2);
            s = s2;
        }
        successes += usize::from(success);
        total_return += ret;
    }
    Ok(EvalReport {
        task_id: task.task_id,
        n_episodes: n,
        successes,
        success_rate: successes as f64 / n as f64,
        mean_return: total_return / n as f64,
        step_of_training,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionLogEntry {
    pub step: u64,
    pub from_task: TaskId,
    pub to_task: TaskId,
}

/// Counts executed tasks (`to_task`) whose step falls in the fraction window
/// `[start, end)` of `total_steps`; `end = 1` includes the final step.
pub fn transition_histogram(
    log: &[TransitionLogEntry],
    total_steps: u64,
    start: f64,
    end: f64,
) -> BTreeMap<TaskId, usize> {
    let lo = start * total_steps as f64;
    let hi = end * total_steps as f64;
    let mut counts = BTreeMap::new();
    for e in log {
        let step = e.step as f64;
        if step >= lo && (step < hi || (end >= 1.0 && step <= hi)) {
            *counts.entry(e.to_task).or_insert(0) += 1;
        }
    }
    counts
}

/// Share of windows in `[start, end)` that ran `task`; zero for an empty window.
pub fn task_share(log: &[TransitionLogEntry], total_steps: u64, start: f64, end: f64, task: TaskId) -> f64 {
    let h = transition_histogram(log, total_steps, start, end);
    let all: usize = h.values().sum();
    if all == 0 {
        0.0
    } else {
        *h.get(&task).unwrap_or(&0) as f64 / all as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::PointMass;
    use crate::rng::stream;

    #[test]
    fn reservoir_respects_capacity_and_keeps_everything_until_full() {
        let schema = crate::mdp::Schema { name: "r", len: 1 };
        let mut rng = stream(0, "res", 0);
        let mut r = StateReservoir::new(4);
        for i in 0..4 {
            r.offer(StateVec::new(schema, vec![i as f64]).unwrap(), &mut rng);
        }
        assert_eq!(r.len(), 4);
        for i in 4..1000 {
            r.offer(StateVec::new(schema, vec![i as f64]).unwrap(), &mut rng);
        }
        assert_eq!(r.len(), 4);
        assert_eq!(r.seen(), 1000);
    }

    #[test]
    fn reservoir_is_uniform() {
        let schema = crate::mdp::Schema { name: "r", len: 1 };
        let mut counts = [0usize; 10];
        for trial in 0..4000 {
            let mut rng = stream(trial, "res", 0);
            let mut r = StateReservoir::new(2);
            for i in 0..10 {
                r.offer(StateVec::new(schema, vec![i as f64]).unwrap(), &mut rng);
            }
            for s in r.items() {
                counts[s.values()[0] as usize] += 1;
            }
        }
        // Each item is kept with probability 0.2: 800 expected, sd about 25.
        for c in counts {
            assert!((c as f64 - 800.0).abs() < 100.0, "{counts:?}");
        }
    }

    fn run(policy: impl Fn(&[f64]) -> Result<Vec<f64>>, n: usize) -> EvalReport {
        let env = PointMass::new(stream(0, "env", 0));
        let task = PointMass::task();
        eval_task(policy, &env, &task, &[], n, 50, EvalSeed { master: 1, index: 0 }, 0).unwrap()
    }

    #[test]
    fn scripted_policies_give_exact_rates() {
        let greedy = |f: &[f64]| Ok(vec![(-f[2] * 10.0).clamp(-1.0, 1.0), (-f[3] * 10.0).clamp(-1.0, 1.0)]);
        assert_eq!(run(greedy, 20).success_rate, 1.0);
        let away = |f: &[f64]| Ok(vec![f[2].signum(), f[3].signum()]);
        assert_eq!(run(away, 20).success_rate, 0.0);
        assert_eq!(run(greedy, 20), run(greedy, 20));
    }

    #[test]
    fn three_of_ten_counts_exactly() {
        let schema = crate::envs::pointmass::POINT_SCHEMA;
        let goal = crate::envs::pointmass::POINT_GOAL;
        // Starts alternate between the goal and a far corner; the policy stands still.
        let starts: Vec<StateVec> = (0..10)
            .map(|i| StateVec::new(schema, if i < 3 { goal.to_vec() } else { vec![-1.0, -1.0] }).unwrap())
            .collect();
        let env = PointMass::new(stream(0, "env", 0));
        let task = PointMass::task();
        let still = |_: &[f64]| Ok(vec![0.0, 0.0]);
        // With replacement sampling the rate is random, so draw each start once via singleton pools.
        let mut successes = 0;
        for (i, s) in starts.iter().enumerate() {
            let r = eval_task(
                still,
                &env,
                &task,
                std::slice::from_ref(s),
                1,
                10,
                EvalSeed { master: 0, index: i as u64 },
                0,
            )
            .unwrap();
            successes += r.successes;
        }
        assert_eq!(successes as f64 / 10.0, 0.3);
    }

    #[test]
    fn histogram_counts() {
        let log = [
            TransitionLogEntry { step: 0, from_task: 0, to_task: 0 },
            TransitionLogEntry { step: 1, from_task: 0, to_task: 0 },
            TransitionLogEntry { step: 2, from_task: 0, to_task: 1 },
        ];
        let h = transition_histogram(&log, 3, 0.0, 1.0);
        assert_eq!(h, BTreeMap::from([(0, 2), (1, 1)]));
        assert!(transition_histogram(&[], 10, 0.0, 1.0).is_empty());
        let first = transition_histogram(&log, 3, 0.0, 0.5);
        let second = transition_histogram(&log, 3, 0.5, 1.0);
        for (k, v) in &h {
            assert_eq!(first.get(k).unwrap_or(&0) + second.get(k).unwrap_or(&0), *v);
        }
        assert!((task_share(&log, 3, 0.0, 1.0, 0) - 2.0 / 3.0).abs() < 1e-15);
    }
}
