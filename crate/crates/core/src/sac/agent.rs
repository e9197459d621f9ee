use rand::Rng as _;
use rand_distr::StandardNormal;

use super::config::{AlphaMode, SacConfig};
use super::replay::{Batch, ReplayBuffer};
use crate::error::{contract, Error, Result};
use crate::nn::{Adam, GaussianHead, Mat, Mlp, Tape, Var, HALF_LN_2PI, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS};
use crate::rng::Rng;

/// Scalars reported by one gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
}

/// One task's soft actor-critic learner.
#[derive(Debug, Clone)]
pub struct SacAgent {
    cfg: SacConfig,
    obs_dim: usize,
    act_dim: usize,
    pub policy: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_alpha: f64,
    pub policy_opt: Adam,
    pub q1_opt: Adam,
    pub q2_opt: Adam,
    pub alpha_opt: Adam,
    /// Environment steps this agent has acted for.
    pub env_steps: u64,
    pub grad_steps: u64,
}

fn standard_normal(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    Mat::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

fn check_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

impl SacAgent {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: &SacConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        if obs_dim == 0 || act_dim == 0 {
            return Err(contract("observation and action dimensions must be positive"));
        }
        let layers = |input: usize, hidden: &[usize], output: usize| {
            let mut v = vec![input];
            v.extend_from_slice(hidden);
            v.push(output);
            v
        };
        let policy = Mlp::new(&layers(obs_dim, &cfg.policy_hidden, 2 * act_dim), 1e-2, rng)?;
        let q_sizes = layers(obs_dim + act_dim, &cfg.q_hidden, 1);
        let q1 = Mlp::new(&q_sizes, 1.0, rng)?;
        let q2 = Mlp::new(&q_sizes, 1.0, rng)?;
        let log_alpha = match cfg.alpha_mode {
            AlphaMode::Auto => cfg.initial_alpha.ln(),
            AlphaMode::Fixed(a) => a.ln(),
        };
        Ok(Self {
            policy_opt: Adam::for_params(cfg.lr, &policy.params()),
            q1_opt: Adam::for_params(cfg.q_lr, &q1.params()),
            q2_opt: Adam::for_params(cfg.q_lr, &q2.params()),
            alpha_opt: Adam::new(cfg.lr, &[(1, 1)]),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            cfg: cfg.clone(),
            obs_dim,
            act_dim,
            policy,
            q1,
            q2,
            log_alpha,
            env_steps: 0,
            grad_steps: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn alpha(&self) -> f64 {
        match self.cfg.alpha_mode {
            AlphaMode::Auto => self.log_alpha.exp(),
            AlphaMode::Fixed(a) => a,
        }
    }

    pub fn head(&self, obs: &[f64]) -> Result<GaussianHead> {
        Ok(GaussianHead::from_output(&self.policy.forward(obs)?))
    }

    /// Stochastic action from the current policy.
    pub fn act(&self, obs: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        Ok(self.head(obs)?.sample(rng).0)
    }

    /// Squashed mean action.
    pub fn act_deterministic(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.head(obs)?.mode())
    }

    /// Data-collection action: uniform during warmup, policy samples after.
    /// Counts the step toward the warmup budget.
    pub fn explore(&mut self, obs: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        let a = if self.env_steps < self.cfg.warmup_steps as u64 {
            (0..self.act_dim).map(|_| rng.random_range(-1.0..1.0)).collect()
        } else {
            self.act(obs, rng)?
        };
        self.env_steps += 1;
        Ok(a)
    }

    pub fn warmed_up(&self) -> bool {
        self.env_steps >= self.cfg.warmup_steps as u64
    }

    /// Squashed samples and log-densities for a batch of observations,
    /// computed row by row from explicit noise.
    pub fn sample_actions(&self, obs: &Mat, noise: &Mat) -> Result<(Mat, Vec<f64>)> {
        let out = self.policy.forward_batch(obs)?;
        let mut actions = Mat::zeros((obs.nrows(), self.act_dim));
        let mut log_probs = Vec::with_capacity(obs.nrows());
        for (i, row) in out.rows().into_iter().enumerate() {
            let head = GaussianHead::from_output(row.as_slice().expect("row-major output"));
            let (a, lp) = head.sample_with_noise(noise.row(i).as_slice().expect("row-major noise"));
            actions.row_mut(i).assign(&ndarray::ArrayView1::from(&a));
            log_probs.push(lp);
        }
        Ok((actions, log_probs))
    }

    fn q_value(q: &Mlp, obs: &Mat, actions: &Mat) -> Result<Mat> {
        let input = ndarray::concatenate(ndarray::Axis(1), &[obs.view(), actions.view()])
            .map_err(|e| contract(format!("critic input: {e}")))?;
        q.forward_batch(&input)
    }

    /// Soft Bellman targets `scale * r + gamma * (min target Q(s', a') - alpha log pi(a'|s'))`.
    /// No terminal masking: the stream never ends.
    pub fn critic_targets(&self, batch: &Batch, next_noise: &Mat) -> Result<Mat> {
        let (next_actions, next_lp) = self.sample_actions(&batch.next_obs, next_noise)?;
        let t1 = Self::q_value(&self.q1_target, &batch.next_obs, &next_actions)?;
        let t2 = Self::q_value(&self.q2_target, &batch.next_obs, &next_actions)?;
        let alpha = self.alpha();
        let (gamma, scale) = (self.cfg.gamma, self.cfg.reward_scale);
        Ok(Mat::from_shape_fn((batch.len(), 1), |(i, _)| {
            let soft = t1[[i, 0]].min(t2[[i, 0]]) - alpha * next_lp[i];
            scale * batch.rewards[[i, 0]] + gamma * soft
        }))
    }

    /// Sum of the two critics' mean squared errors, evaluated without a tape.
    pub fn critic_loss_value(&self, batch: &Batch, next_noise: &Mat) -> Result<f64> {
        let y = self.critic_targets(batch, next_noise)?;
        let mut total = 0.0;
        for q in [&self.q1, &self.q2] {
            let pred = Self::q_value(q, &batch.obs, &batch.actions)?;
            total += (&pred - &y).mapv(|d| d * d).mean().unwrap_or(0.0);
        }
        Ok(total)
    }

    /// Critic loss and the gradients of each critic's parameters.
    pub fn critic_loss_grads(&self, batch: &Batch, next_noise: &Mat) -> Result<(f64, Vec<Mat>, Vec<Mat>)> {
        let y = self.critic_targets(batch, next_noise)?;
        let mut tape = Tape::new();
        let input = ndarray::concatenate(ndarray::Axis(1), &[batch.obs.view(), batch.actions.view()])
            .map_err(|e| contract(format!("critic input: {e}")))?;
        let x = tape.constant(input);
        let yv = tape.constant(y);
        let mut losses = Vec::with_capacity(2);
        let mut vars = Vec::with_capacity(2);
        for q in [&self.q1, &self.q2] {
            let rec = q.record(&mut tape, x, true)?;
            let diff = tape.sub(rec.output, yv)?;
            let sq = tape.square(diff);
            losses.push(tape.mean(sq));
            vars.push(rec.params);
        }
        let total = tape.add(losses[0], losses[1])?;
        let loss = tape.scalar(total);
        let grads = tape.backward(total)?;
        let collect = |net: &Mlp, vs: &[Var]| -> Vec<Mat> {
            net.params().iter().zip(vs).map(|(p, &v)| grads.get_or_zeros(v, p.dim())).collect()
        };
        let g1 = collect(&self.q1, &vars[0]);
        let g2 = collect(&self.q2, &vars[1]);
        Ok((loss, g1, g2))
    }

    /// One Adam step on both critics toward freshly sampled soft targets.
    pub fn critic_update(&mut self, batch: &Batch, rng: &mut Rng) -> Result<f64> {
        if batch.is_empty() {
            return Err(contract("critic update on an empty batch"));
        }
        let noise = standard_normal(batch.len(), self.act_dim, rng);
        let (loss, mut g1, mut g2) = self.critic_loss_grads(batch, &noise)?;
        check_finite(loss, "critic loss")?;
        let wd = self.cfg.q_weight_decay;
        if wd > 0.0 {
            for (g, p) in g1.iter_mut().zip(self.q1.params()) {
                g.scaled_add(wd, p);
            }
            for (g, p) in g2.iter_mut().zip(self.q2.params()) {
                g.scaled_add(wd, p);
            }
        }
        self.q1_opt.step(&mut self.q1.params_mut(), &g1)?;
        self.q2_opt.step(&mut self.q2.params_mut(), &g2)?;
        Ok(loss)
    }

    /// Actor objective `mean(alpha * log pi(a|s) - min Q(s, a))` with
    /// reparameterised `a = tanh(mu + sigma * noise)`, evaluated without a tape.
    /// Returns `(loss, mean log pi)`.
    pub fn actor_loss_value(&self, batch: &Batch, noise: &Mat) -> Result<(f64, f64)> {
        let (actions, lp) = self.sample_actions(&batch.obs, noise)?;
        let q1 = Self::q_value(&self.q1, &batch.obs, &actions)?;
        let q2 = Self::q_value(&self.q2, &batch.obs, &actions)?;
        let alpha = self.alpha();
        let n = batch.len() as f64;
        let loss = (0..batch.len()).map(|i| alpha * lp[i] - q1[[i, 0]].min(q2[[i, 0]])).sum::<f64>() / n;
        Ok((loss, lp.iter().sum::<f64>() / n))
    }

    /// Actor loss, policy-parameter gradients, and mean log pi.
    pub fn actor_loss_grads(&self, batch: &Batch, noise: &Mat) -> Result<(f64, Vec<Mat>, f64)> {
        let d = self.act_dim;
        let mut tape = Tape::new();
        let x = tape.constant(batch.obs.clone());
        let pol = self.policy.record(&mut tape, x, true)?;
        let mean = tape.cols(pol.output, 0, d)?;
        let raw_ls = tape.cols(pol.output, d, 2 * d)?;
        let log_std = tape.clamp(raw_ls, LOG_STD_MIN, LOG_STD_MAX);
        let std = tape.exp(log_std);
        let xi = tape.constant(noise.clone());
        let spread = tape.mul(std, xi)?;
        let pre = tape.add(mean, spread)?;
        let action = tape.tanh(pre);
        // log N(pre; mean, std) = -xi^2/2 - log_std - ln(2 pi)/2, per entry.
        let gauss_const = tape.constant(noise.mapv(|z| -0.5 * z * z - HALF_LN_2PI));
        let gauss = tape.sub(gauss_const, log_std)?;
        let a2 = tape.square(action);
        let neg_a2 = tape.scale(a2, -1.0);
        let jac = tape.shift(neg_a2, 1.0 + SQUASH_EPS);
        let log_jac = tape.log(jac);
        let per_entry = tape.sub(gauss, log_jac)?;
        let log_prob = tape.sum_cols(per_entry);

        let q_in = tape.concat(x, action)?;
        let q1 = self.q1.record(&mut tape, q_in, false)?;
        let q2 = self.q2.record(&mut tape, q_in, false)?;
        let min_q = tape.min(q1.output, q2.output)?;
        let weighted = tape.scale(log_prob, self.alpha());
        let obj = tape.sub(weighted, min_q)?;
        let loss_var = tape.mean(obj);
        let loss = tape.scalar(loss_var);
        let mean_lp = tape.value(log_prob).mean().unwrap_or(0.0);
        let grads = tape.backward(loss_var)?;
        let g = self.policy.params().iter().zip(&pol.params).map(|(p, &v)| grads.get_or_zeros(v, p.dim())).collect();
        Ok((loss, g, mean_lp))
    }

    /// d/d(log alpha) of `mean(-alpha * (log pi + target_entropy))`.
    pub fn alpha_gradient(&self, mean_log_prob: f64) -> f64 {
        let target = self.cfg.target_entropy_for(self.act_dim);
        -self.log_alpha.exp() * (mean_log_prob + target)
    }

    /// One Adam step on the policy; with automatic temperature, one on log alpha.
    pub fn actor_update(&mut self, batch: &Batch, rng: &mut Rng) -> Result<f64> {
        if batch.is_empty() {
            return Err(contract("actor update on an empty batch"));
        }
        let noise = standard_normal(batch.len(), self.act_dim, rng);
        let (loss, grads, mean_lp) = self.actor_loss_grads(batch, &noise)?;
        check_finite(loss, "actor loss")?;
        self.policy_opt.step(&mut self.policy.params_mut(), &grads)?;
        if self.cfg.alpha_mode == AlphaMode::Auto {
            let g = check_finite(self.alpha_gradient(mean_lp), "temperature gradient")?;
            let mut la = Mat::from_elem((1, 1), self.log_alpha);
            self.alpha_opt.step(&mut [&mut la], &[Mat::from_elem((1, 1), g)])?;
            self.log_alpha = la[[0, 0]];
        }
        Ok(loss)
    }

    /// `target <- tau * online + (1 - tau) * target` for both critics.
    pub fn soft_target_update(&mut self, tau: f64) -> Result<()> {
        self.q1_target.soft_update_from(&self.q1, tau)?;
        self.q2_target.soft_update_from(&self.q2, tau)
    }

    /// Full gradient step from one batch of `buffer`.
    pub fn update(&mut self, buffer: &ReplayBuffer, rng: &mut Rng) -> Result<UpdateStats> {
        let batch = buffer.training_batch(self.cfg.batch_size, rng)?;
        let critic_loss = self.critic_update(&batch, rng)?;
        let actor_loss = self.actor_update(&batch, rng)?;
        self.soft_target_update(self.cfg.tau)?;
        self.grad_steps += 1;
        Ok(UpdateStats { critic_loss, actor_loss, alpha: self.alpha() })
    }

    pub fn is_finite(&self) -> bool {
        [&self.policy, &self.q1, &self.q2, &self.q1_target, &self.q2_target].iter().all(|m| m.is_finite())
            && (self.cfg.alpha_mode != AlphaMode::Auto || self.log_alpha.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn tiny_cfg() -> SacConfig {
        SacConfig {
            policy_hidden: vec![6, 5],
            q_hidden: vec![5, 4],
            batch_size: 7,
            replay_capacity: 100,
            warmup_steps: 0,
            ..SacConfig::paper()
        }
    }

    fn random_mat(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Mat {
        Mat::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
    }

    fn tiny_batch(n: usize, obs: usize, act: usize, rng: &mut Rng) -> Batch {
        Batch {
            obs: random_mat(n, obs, 1.0, rng),
            actions: random_mat(n, act, 0.99, rng),
            rewards: random_mat(n, 1, 2.0, rng),
            next_obs: random_mat(n, obs, 1.0, rng),
        }
    }

    /// Randomises every parameter so no gradient is trivially zero.
    fn tiny_agent(seed: u64) -> SacAgent {
        let mut rng = stream(seed, "tiny", 0);
        let mut agent = SacAgent::new(3, 2, &tiny_cfg(), &mut rng).unwrap();
        for net in [&mut agent.policy, &mut agent.q1, &mut agent.q2, &mut agent.q1_target, &mut agent.q2_target] {
            for p in net.params_mut() {
                p.mapv_inplace(|_| rng.random_range(-0.8..0.8));
            }
        }
        agent.log_alpha = 0.3f64.ln();
        agent
    }

    const H: f64 = 1e-5;

    fn rel_err(analytic: f64, numeric: f64) -> f64 {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
    }

    /// Central differences of `f` over every entry of the parameters picked by `net`.
    fn numeric_grads(agent: &SacAgent, net: fn(&mut SacAgent) -> &mut Mlp, f: &dyn Fn(&SacAgent) -> f64) -> Vec<Mat> {
        let mut probe = agent.clone();
        let shapes: Vec<_> = net(&mut probe).params().iter().map(|p| p.dim()).collect();
        let mut out: Vec<Mat> = shapes.iter().map(|&d| Mat::zeros(d)).collect();
        for (k, &(r, c)) in shapes.iter().enumerate() {
            for i in 0..r {
                for j in 0..c {
                    let orig = net(&mut probe).params()[k][[i, j]];
                    net(&mut probe).params_mut()[k][[i, j]] = orig + H;
                    let up = f(&probe);
                    net(&mut probe).params_mut()[k][[i, j]] = orig - H;
                    let down = f(&probe);
                    net(&mut probe).params_mut()[k][[i, j]] = orig;
                    out[k][[i, j]] = (up - down) / (2.0 * H);
                }
            }
        }
        out
    }

    fn max_rel_err(analytic: &[Mat], numeric: &[Mat]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .flat_map(|(a, n)| a.iter().zip(n.iter()).map(|(&x, &y)| rel_err(x, y)).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        for seed in 0..3 {
            let agent = tiny_agent(seed);
            let mut rng = stream(seed, "batch", 0);
            let batch = tiny_batch(7, 3, 2, &mut rng);
            let noise = random_mat(7, 2, 2.0, &mut rng);
            let (loss, g1, g2) = agent.critic_loss_grads(&batch, &noise).unwrap();
            assert!((loss - agent.critic_loss_value(&batch, &noise).unwrap()).abs() < 1e-12);
            let f = |a: &SacAgent| a.critic_loss_value(&batch, &noise).unwrap();
            let n1 = numeric_grads(&agent, |a| &mut a.q1, &f);
            let n2 = numeric_grads(&agent, |a| &mut a.q2, &f);
            assert!(max_rel_err(&g1, &n1) < 1e-4, "q1 rel err {}", max_rel_err(&g1, &n1));
            assert!(max_rel_err(&g2, &n2) < 1e-4, "q2 rel err {}", max_rel_err(&g2, &n2));
        }
    }

    #[test]
    fn actor_gradients_match_finite_differences() {
        for seed in 0..3 {
            let agent = tiny_agent(10 + seed);
            let mut rng = stream(seed, "batch", 1);
            let batch = tiny_batch(7, 3, 2, &mut rng);
            let noise = random_mat(7, 2, 2.0, &mut rng);
            let (loss, g, mean_lp) = agent.actor_loss_grads(&batch, &noise).unwrap();
            let (value, value_lp) = agent.actor_loss_value(&batch, &noise).unwrap();
            assert!((loss - value).abs() < 1e-10);
            assert!((mean_lp - value_lp).abs() < 1e-10);
            let f = |a: &SacAgent| a.actor_loss_value(&batch, &noise).unwrap().0;
            let n = numeric_grads(&agent, |a| &mut a.policy, &f);
            assert!(max_rel_err(&g, &n) < 1e-4, "policy rel err {}", max_rel_err(&g, &n));
        }
    }

    #[test]
    fn temperature_gradient_matches_finite_difference() {
        let mut agent = tiny_agent(4);
        let mean_lp = -0.7;
        let target = agent.config().target_entropy_for(2);
        let loss = |la: f64| -la.exp() * (mean_lp + target);
        let la = agent.log_alpha;
        let numeric = (loss(la + H) - loss(la - H)) / (2.0 * H);
        assert!(rel_err(agent.alpha_gradient(mean_lp), numeric) < 1e-4);
        // Entropy above target (log pi well below -target) pushes alpha down.
        let before = agent.alpha();
        let g = agent.alpha_gradient(-10.0);
        assert!(g > 0.0);
        let mut p = Mat::from_elem((1, 1), agent.log_alpha);
        agent.alpha_opt.step(&mut [&mut p], &[Mat::from_elem((1, 1), g)]).unwrap();
        agent.log_alpha = p[[0, 0]];
        assert!(agent.alpha() < before);
    }

    #[test]
    fn zero_discount_zero_temperature_targets_equal_rewards() {
        let cfg = SacConfig { gamma: 0.0, alpha_mode: AlphaMode::Fixed(0.0), ..tiny_cfg() };
        let mut rng = stream(1, "g0", 0);
        let agent = SacAgent::new(3, 2, &cfg, &mut rng).unwrap();
        assert!(agent.is_finite());
        let batch = tiny_batch(5, 3, 2, &mut rng);
        let noise = random_mat(5, 2, 1.0, &mut rng);
        assert_eq!(agent.critic_targets(&batch, &noise).unwrap(), batch.rewards);
    }

    #[test]
    fn targets_trail_online_critics() {
        let mut agent = tiny_agent(7);
        let tau = agent.config().tau;
        let before: Vec<Mat> = agent.q1_target.params().into_iter().cloned().collect();
        agent.soft_target_update(tau).unwrap();
        for ((new, old), online) in agent.q1_target.params().iter().zip(&before).zip(agent.q1.params()) {
            let expect = old * (1.0 - tau) + online * tau;
            assert!((*new - &expect).iter().all(|d| d.abs() < 1e-15));
        }
    }

    #[test]
    fn warmup_actions_are_uniform_then_policy() {
        let cfg = SacConfig { warmup_steps: 3, ..tiny_cfg() };
        let mut rng = stream(2, "warm", 0);
        let mut agent = SacAgent::new(3, 2, &cfg, &mut rng).unwrap();
        for _ in 0..3 {
            assert!(!agent.warmed_up());
            let a = agent.explore(&[0.0, 0.0, 0.0], &mut rng).unwrap();
            assert!(a.iter().all(|x| (-1.0..1.0).contains(x)));
        }
        assert!(agent.warmed_up());
        let mode = agent.act_deterministic(&[0.1, 0.2, 0.3]).unwrap();
        assert!(mode.iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn update_changes_only_online_parameters_consistently() {
        let mut rng = stream(5, "upd", 0);
        let mut agent = tiny_agent(5);
        let feat: super::super::replay::Featurizer = std::sync::Arc::new(|s| s.values().to_vec());
        let mut buf = ReplayBuffer::new(0, 50, feat).unwrap();
        let schema = crate::mdp::Schema { name: "t", len: 3 };
        for i in 0..20 {
            let s = crate::mdp::StateVec::new(schema, vec![i as f64 / 20.0, 0.1, -0.2]).unwrap();
            let a = crate::mdp::ActionVec::new(vec![0.1, -0.3]).unwrap();
            buf.push(crate::mdp::Transition::new(s.clone(), a, 1.0, s, 0).unwrap()).unwrap();
        }
        let stats = agent.update(&buf, &mut rng).unwrap();
        assert!(stats.critic_loss.is_finite() && stats.actor_loss.is_finite());
        assert_eq!(agent.grad_steps, 1);
        assert!(agent.is_finite());
    }
}
