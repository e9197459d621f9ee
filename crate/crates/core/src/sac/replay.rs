use std::sync::Arc;

use rand::Rng as _;

use crate::error::{contract, Error, Result};
use crate::mdp::{StateVec, TaskId, Transition};
use crate::nn::Mat;
use crate::rng::Rng;

pub type Featurizer = Arc<dyn Fn(&StateVec) -> Vec<f64> + Send + Sync>;

/// Training view of sampled transitions: one row per draw.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Mat,
    pub actions: Mat,
    pub rewards: Mat,
    pub next_obs: Mat,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.obs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fixed-capacity FIFO store of one task's transitions, sampled uniformly
/// with replacement. Policy features are computed once at push time.
#[derive(Clone)]
pub struct ReplayBuffer {
    task_id: TaskId,
    capacity: usize,
    storage: Vec<Transition>,
    obs: Vec<Vec<f64>>,
    next_obs: Vec<Vec<f64>>,
    cursor: usize,
    pushes: u64,
    featurizer: Featurizer,
}

impl std::fmt::Debug for ReplayBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReplayBuffer")
            .field("task_id", &self.task_id)
            .field("capacity", &self.capacity)
            .field("len", &self.storage.len())
            .field("cursor", &self.cursor)
            .field("pushes", &self.pushes)
            .finish()
    }
}

impl ReplayBuffer {
    pub fn new(task_id: TaskId, capacity: usize, featurizer: Featurizer) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            task_id,
            capacity,
            storage: Vec::new(),
            obs: Vec::new(),
            next_obs: Vec::new(),
            cursor: 0,
            pushes: 0,
            featurizer,
        })
    }

    /// Rebuilds a buffer from its slots in storage order, as returned by [`ReplayBuffer::slots`].
    pub fn restore(
        task_id: TaskId,
        capacity: usize,
        featurizer: Featurizer,
        slots: Vec<Transition>,
        cursor: usize,
        pushes: u64,
    ) -> Result<Self> {
        let mut b = Self::new(task_id, capacity, featurizer)?;
        if slots.len() > capacity || cursor >= capacity || (slots.len() as u64) > pushes {
            return Err(contract("replay contents do not fit the buffer"));
        }
        if slots.len() < capacity && cursor != slots.len() % capacity {
            return Err(contract("replay cursor inconsistent with a partly filled buffer"));
        }
        for t in slots {
            if t.task_id != task_id {
                return Err(contract("restored transition belongs to another task"));
            }
            b.obs.push((b.featurizer)(&t.state));
            b.next_obs.push((b.featurizer)(&t.next_state));
            b.storage.push(t);
        }
        b.cursor = cursor;
        b.pushes = pushes;
        Ok(b)
    }

    /// Transitions in storage order (not age order once the buffer has wrapped).
    pub fn slots(&self) -> &[Transition] {
        &self.storage
    }

    pub fn featurizer(&self) -> Featurizer {
        self.featurizer.clone()
    }

    /// Number of transitions ever pushed, including overwritten ones.
    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    pub fn task_id(&self) -> TaskId {
        self.task_id
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Index of the slot the next push overwrites once full.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.task_id != self.task_id {
            return Err(contract(format!(
                "transition for task {} routed to buffer of task {}",
                t.task_id, self.task_id
            )));
        }
        let obs = (self.featurizer)(&t.state);
        let next_obs = (self.featurizer)(&t.next_state);
        if self.storage.len() < self.capacity {
            self.storage.push(t);
            self.obs.push(obs);
            self.next_obs.push(next_obs);
        } else {
            self.storage[self.cursor] = t;
            self.obs[self.cursor] = obs;
            self.next_obs[self.cursor] = next_obs;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.pushes += 1;
        Ok(())
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity { 0 } else { self.cursor };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    pub fn sample_indices(&self, n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..n).map(|_| rng.random_range(0..self.storage.len())).collect())
    }

    /// `n` uniform draws with replacement.
    pub fn sample_batch(&self, n: usize, rng: &mut Rng) -> Result<Vec<&Transition>> {
        Ok(self.sample_indices(n, rng)?.into_iter().map(|i| &self.storage[i]).collect())
    }

    pub fn training_batch(&self, n: usize, rng: &mut Rng) -> Result<Batch> {
        let idx = self.sample_indices(n, rng)?;
        Ok(self.gather(&idx))
    }

    fn gather(&self, idx: &[usize]) -> Batch {
        let obs_dim = self.obs[0].len();
        let act_dim = self.storage[0].action.len();
        let n = idx.len();
        let mut obs = Vec::with_capacity(n * obs_dim);
        let mut next_obs = Vec::with_capacity(n * obs_dim);
        let mut actions = Vec::with_capacity(n * act_dim);
        let mut rewards = Vec::with_capacity(n);
        for &i in idx {
            obs.extend_from_slice(&self.obs[i]);
            next_obs.extend_from_slice(&self.next_obs[i]);
            actions.extend_from_slice(self.storage[i].action.values());
            rewards.push(self.storage[i].reward);
        }
        Batch {
            obs: Mat::from_shape_vec((n, obs_dim), obs).expect("obs rows"),
            actions: Mat::from_shape_vec((n, act_dim), actions).expect("action rows"),
            rewards: Mat::from_shape_vec((n, 1), rewards).expect("reward column"),
            next_obs: Mat::from_shape_vec((n, obs_dim), next_obs).expect("next obs rows"),
        }
    }
}
