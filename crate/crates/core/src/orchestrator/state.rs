//! Saving and restoring a trainer's complete state.

use super::{Learner, Trainer};
use crate::error::{Error, Result};
use crate::eval::{StateReservoir, TransitionLogEntry};
use crate::mdp::{ActionVec, Environment, StateVec, TaskId, Transition};
use crate::sac::{ReplayBuffer, SacAgent};
use crate::snapshot::Snapshot;

fn put_agent(snap: &mut Snapshot, p: &str, a: &SacAgent) {
    snap.put_mlp(&format!("{p}.policy"), &a.policy);
    snap.put_mlp(&format!("{p}.q1"), &a.q1);
    snap.put_mlp(&format!("{p}.q2"), &a.q2);
    snap.put_mlp(&format!("{p}.q1_target"), &a.q1_target);
    snap.put_mlp(&format!("{p}.q2_target"), &a.q2_target);
    snap.put_adam(&format!("{p}.policy_opt"), &a.policy_opt);
    snap.put_adam(&format!("{p}.q1_opt"), &a.q1_opt);
    snap.put_adam(&format!("{p}.q2_opt"), &a.q2_opt);
    snap.put_adam(&format!("{p}.alpha_opt"), &a.alpha_opt);
    snap.put_f64(format!("{p}.log_alpha"), vec![1], vec![a.log_alpha]);
    snap.put_u64(format!("{p}.counters"), vec![a.env_steps, a.grad_steps]);
}

/// Restores an agent's parameters, optimizer moments, temperature, and counters.
pub fn load_agent(snap: &Snapshot, p: &str, a: &mut SacAgent) -> Result<()> {
    snap.load_mlp(&format!("{p}.policy"), &mut a.policy)?;
    snap.load_mlp(&format!("{p}.q1"), &mut a.q1)?;
    snap.load_mlp(&format!("{p}.q2"), &mut a.q2)?;
    snap.load_mlp(&format!("{p}.q1_target"), &mut a.q1_target)?;
    snap.load_mlp(&format!("{p}.q2_target"), &mut a.q2_target)?;
    snap.load_adam(&format!("{p}.policy_opt"), &mut a.policy_opt)?;
    snap.load_adam(&format!("{p}.q1_opt"), &mut a.q1_opt)?;
    snap.load_adam(&format!("{p}.q2_opt"), &mut a.q2_opt)?;
    snap.load_adam(&format!("{p}.alpha_opt"), &mut a.alpha_opt)?;
    a.log_alpha = snap.f64s(&format!("{p}.log_alpha"))?.1.first().copied().ok_or_else(|| bad(p))?;
    a.env_steps = snap.u64_at(&format!("{p}.counters"), 0)?;
    a.grad_steps = snap.u64_at(&format!("{p}.counters"), 1)?;
    Ok(())
}

fn bad(what: &str) -> Error {
    Error::Snapshot(format!("malformed section {what}"))
}

fn states_to_rows(states: &[StateVec], width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(states.len() * width);
    for s in states {
        out.extend_from_slice(s.values());
    }
    out
}

impl<E: Environment + Clone + Send + Sync + 'static> Trainer<E> {
    /// Captures everything needed to continue training. Replay contents are
    /// included only when `with_buffers` is set; buffer sizes always are.
    pub fn export(&self, with_buffers: bool) -> Snapshot {
        let mut snap = Snapshot::new();
        snap.put_u64(
            "trainer.counters",
            vec![self.total_steps, self.windows, self.evals, self.prev_task as u64, self.slots.len() as u64],
        );
        let log: Vec<u64> =
            self.transition_log.iter().flat_map(|e| [e.step, e.from_task as u64, e.to_task as u64]).collect();
        snap.put_u64_matrix("trainer.transitions", 3, log);

        let schema = self.env.schema();
        let state = self.env.state();
        snap.put_f64("env.state", vec![schema.len as u64], state.values().to_vec());
        snap.put_rng("env.rng", &self.env.rng_state().restore());
        snap.put_u64("env.steps", vec![self.env.steps_taken()]);

        snap.put_rng("reservoir.rng", &self.reservoir_rng);
        for (t, r) in self.reservoirs.iter().enumerate() {
            snap.put_f64(
                format!("reservoir.{t}.states"),
                vec![r.len() as u64, schema.len as u64],
                states_to_rows(r.items(), schema.len),
            );
            snap.put_u64(format!("reservoir.{t}.seen"), vec![r.seen()]);
        }

        if let Some(rnd) = &self.rnd {
            snap.put_mlp("rnd.target", &rnd.target);
            snap.put_mlp("rnd.predictor", &rnd.predictor);
            snap.put_adam("rnd.opt", &rnd.opt);
            snap.put_u64("rnd.count", vec![rnd.stats.count]);
            snap.put_f64("rnd.moments", vec![2], vec![rnd.stats.mean, rnd.stats.m2]);
        }

        for (i, slot) in self.slots.iter().enumerate() {
            let p = format!("slot.{i}");
            snap.put_rng(format!("{p}.rng"), &slot.rng);
            if let Learner::Sac(a) = &slot.learner {
                put_agent(&mut snap, &format!("{p}.agent"), a);
            }
            let b = &slot.buffer;
            snap.put_u64(format!("{p}.buffer.meta"), vec![b.len() as u64, b.cursor() as u64, b.pushes()]);
            if with_buffers {
                let rows = b.slots();
                let width = rows.first().map_or(0, |t| 2 * t.state.values().len() + t.action.len() + 1);
                let mut data = Vec::with_capacity(rows.len() * width);
                for t in rows {
                    data.extend_from_slice(t.state.values());
                    data.extend_from_slice(t.action.values());
                    data.push(t.reward);
                    data.extend_from_slice(t.next_state.values());
                }
                snap.put_f64(format!("{p}.buffer.data"), vec![rows.len() as u64, width as u64], data);
            }
        }
        snap
    }

    /// Loads agents, novelty networks, reservoirs, and counters: enough to
    /// evaluate, not to continue training.
    pub fn import_models(&mut self, snap: &Snapshot) -> Result<()> {
        let counters = snap.u64s("trainer.counters")?;
        if counters.len() != 5 || counters[4] as usize != self.slots.len() {
            return Err(Error::Snapshot("checkpoint was taken from a different algorithm layout".into()));
        }
        let schema = self.env.schema();
        self.reservoir_rng = snap.rng("reservoir.rng")?;
        for t in 0..self.reservoirs.len() {
            let (shape, data) = snap.f64s(&format!("reservoir.{t}.states"))?;
            let items = data
                .chunks(schema.len.max(1))
                .take(shape.first().copied().unwrap_or(0) as usize)
                .map(|row| StateVec::new(schema, row.to_vec()))
                .collect::<Result<Vec<_>>>()?;
            let seen = snap.u64_at(&format!("reservoir.{t}.seen"), 0)?;
            self.reservoirs[t] = StateReservoir::from_parts(self.cfg.reservoir_capacity, items, seen)?;
        }

        if let Some(rnd) = self.rnd.as_mut() {
            snap.load_mlp("rnd.target", &mut rnd.target)?;
            snap.load_mlp("rnd.predictor", &mut rnd.predictor)?;
            snap.load_adam("rnd.opt", &mut rnd.opt)?;
            rnd.stats.count = snap.u64_at("rnd.count", 0)?;
            let m = snap.f64s("rnd.moments")?.1;
            if m.len() != 2 {
                return Err(bad("rnd.moments"));
            }
            rnd.stats.mean = m[0];
            rnd.stats.m2 = m[1];
        }

        for (i, slot) in self.slots.iter_mut().enumerate() {
            if let Learner::Sac(a) = &mut slot.learner {
                load_agent(snap, &format!("slot.{i}.agent"), a)?;
            }
        }
        self.total_steps = counters[0];
        self.windows = counters[1];
        self.evals = counters[2];
        self.prev_task = counters[3] as TaskId;
        let log = snap.u64s("trainer.transitions")?;
        self.transition_log = log
            .chunks_exact(3)
            .map(|c| TransitionLogEntry { step: c[0], from_task: c[1] as TaskId, to_task: c[2] as TaskId })
            .collect();
        Ok(())
    }

    /// Loads a full snapshot (with replay contents) taken from a trainer
    /// built with the same configuration, so training continues exactly.
    pub fn import(&mut self, snap: &Snapshot) -> Result<()> {
        self.import_models(snap)?;
        let schema = self.env.schema();
        let state = StateVec::new(schema, snap.f64s("env.state")?.1.to_vec())?;
        self.env.set_state(&state)?;
        self.env.set_rng(snap.rng("env.rng")?);
        self.env.set_steps_taken(snap.u64_at("env.steps", 0)?);
        self.env.set_prev_task(self.prev_task);

        let act_dim = self.env.action_dim();
        for i in 0..self.slots.len() {
            let p = format!("slot.{i}");
            let slot = &mut self.slots[i];
            slot.rng = snap.rng(&format!("{p}.rng"))?;
            let meta = snap.u64s(&format!("{p}.buffer.meta"))?;
            if meta.len() != 3 {
                return Err(bad(&format!("{p}.buffer.meta")));
            }
            let (len, cursor, pushes) = (meta[0] as usize, meta[1] as usize, meta[2]);
            let name = format!("{p}.buffer.data");
            if !snap.contains(&name) {
                return Err(Error::Snapshot("checkpoint holds no replay contents and cannot resume training".into()));
            }
            let (shape, data) = snap.f64s(&name)?;
            let width = 2 * schema.len + act_dim + 1;
            if shape.first().copied() != Some(len as u64) || (len > 0 && shape[1] as usize != width) {
                return Err(bad(&name));
            }
            let task: TaskId = slot.task_id;
            let rows = data
                .chunks(width)
                .take(len)
                .map(|row| {
                    let (s, rest) = row.split_at(schema.len);
                    let (a, rest) = rest.split_at(act_dim);
                    let (r, s2) = rest.split_at(1);
                    Transition::new(
                        StateVec::new(schema, s.to_vec())?,
                        ActionVec::new(a.to_vec())?,
                        r[0],
                        StateVec::new(schema, s2.to_vec())?,
                        task,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let b = &slot.buffer;
            slot.buffer = ReplayBuffer::restore(task, b.capacity(), b.featurizer(), rows, cursor, pushes)?;
        }
        Ok(())
    }
}
