//! Random network distillation novelty bonus.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{Adam, Mat, Mlp, Tape};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RndConfig {
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub lr: f64,
}

impl Default for RndConfig {
    fn default() -> Self {
        Self { hidden: vec![64], embedding_dim: 16, lr: 1e-3 }
    }
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / self.count as f64).sqrt()
        }
    }
}

/// A frozen random target network and a predictor trained to imitate it.
#[derive(Debug, Clone)]
pub struct RndPair {
    pub target: Mlp,
    pub predictor: Mlp,
    pub opt: Adam,
    pub stats: RunningStats,
}

impl RndPair {
    pub fn new(input_dim: usize, cfg: &RndConfig, rng: &mut Rng) -> Result<Self> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(cfg.embedding_dim);
        let target = Mlp::new(&sizes, 1.0, rng)?;
        let predictor = Mlp::new(&sizes, 1.0, rng)?;
        let opt = Adam::for_params(cfg.lr, &predictor.params());
        Ok(Self { target, predictor, opt, stats: RunningStats::default() })
    }

    /// Squared prediction error, without training or normalising.
    pub fn raw_bonus(&self, x: &[f64]) -> Result<f64> {
        let p = self.predictor.forward(x)?;
        let t = self.target.forward(x)?;
        Ok(p.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum())
    }

    /// Novelty of `x` divided by the running std of past raw bonuses; then
    /// one Adam step moves the predictor toward the target at `x`.
    pub fn bonus(&mut self, x: &[f64]) -> Result<f64> {
        let raw = self.raw_bonus(x)?;
        self.stats.push(raw);
        let std = self.stats.std();
        let normalized = if std > 1e-12 { raw / std } else { raw };
        self.train_step(x)?;
        Ok(normalized)
    }

    fn train_step(&mut self, x: &[f64]) -> Result<()> {
        let mut tape = Tape::new();
        let input = tape.constant(Mat::from_shape_vec((1, x.len()), x.to_vec()).expect("row input"));
        let target = Mat::from_shape_vec((1, self.target.output_dim()), self.target.forward(x)?).expect("row target");
        let t = tape.constant(target);
        let rec = self.predictor.record(&mut tape, input, true)?;
        let diff = tape.sub(rec.output, t)?;
        let sq = tape.square(diff);
        let loss = tape.mean(sq);
        let grads = tape.backward(loss)?;
        let g: Vec<Mat> =
            self.predictor.params().iter().zip(&rec.params).map(|(p, &v)| grads.get_or_zeros(v, p.dim())).collect();
        self.opt.step(&mut self.predictor.params_mut(), &g)
    }
}
