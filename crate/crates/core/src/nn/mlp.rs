use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;

use super::tape::{Mat, Tape, Var};
use crate::error::{contract, Result};
use crate::rng::Rng;

/// Fully connected network: ReLU on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Mat>,
    biases: Vec<Mat>,
}

/// Parameter handles of an [`Mlp`] placed on a tape, ordered `w0, b0, w1, b1, ...`.
pub struct MlpVars {
    pub output: Var,
    pub params: Vec<Var>,
}

impl Mlp {
    /// Uniform fan-in initialisation, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for
    /// weights and biases. The last layer is multiplied by `final_scale`.
    pub fn new(sizes: &[usize], final_scale: f64, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let layers = net.weights.len();
        for (i, (w, b)) in net.weights.iter_mut().zip(net.biases.iter_mut()).enumerate() {
            let bound = 1.0 / (w.nrows() as f64).sqrt();
            let scale = if i + 1 == layers { final_scale } else { 1.0 };
            w.mapv_inplace(|_| rng.random_range(-bound..bound) * scale);
            b.mapv_inplace(|_| rng.random_range(-bound..bound) * scale);
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(contract(format!("invalid layer sizes {sizes:?}")));
        }
        let weights = sizes.windows(2).map(|p| Mat::zeros((p[0], p[1]))).collect();
        let biases = sizes.windows(2).map(|p| Mat::zeros((1, p[1]))).collect();
        Ok(Self { sizes: sizes.to_vec(), weights, biases })
    }

    /// Builds from explicit layers; `biases[i]` must be `1 x weights[i].ncols()`.
    pub fn from_layers(weights: Vec<Mat>, biases: Vec<Mat>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(contract("need one bias per weight matrix"));
        }
        let mut sizes = vec![weights[0].nrows()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.nrows() != *sizes.last().unwrap() || b.dim() != (1, w.ncols()) {
                return Err(contract("incompatible consecutive layer shapes"));
            }
            sizes.push(w.ncols());
        }
        Ok(Self { sizes, weights, biases })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(|m| m.len()).sum()
    }

    /// Parameters in `w0, b0, w1, b1, ...` order.
    pub fn params(&self) -> Vec<&Mat> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Mat> {
        self.weights.iter_mut().zip(self.biases.iter_mut()).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|m| m.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("1 x n view");
        Ok(self.forward_view(x)?.into_raw_vec_and_offset().0)
    }

    /// Batched forward pass, one sample per row.
    pub fn forward_batch(&self, x: &Mat) -> Result<Mat> {
        self.forward_view(x.view())
    }

    fn forward_view(&self, x: ArrayView2<f64>) -> Result<Mat> {
        if x.ncols() != self.input_dim() {
            return Err(contract(format!("input has {} features, network expects {}", x.ncols(), self.input_dim())));
        }
        let last = self.weights.len() - 1;
        let mut h: Array2<f64> = x.dot(&self.weights[0]) + &self.biases[0];
        for i in 1..=last {
            h.mapv_inplace(|v| v.max(0.0));
            h = h.dot(&self.weights[i]) + &self.biases[i];
        }
        Ok(h)
    }

    /// Records the forward pass on `tape`. With `trainable = false` the
    /// parameters enter as constants and receive no gradient.
    pub fn record(&self, tape: &mut Tape, x: Var, trainable: bool) -> Result<MlpVars> {
        let mut params = Vec::with_capacity(2 * self.weights.len());
        let mut h = x;
        let last = self.weights.len() - 1;
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (wv, bv) = if trainable {
                (tape.param(w.clone()), tape.param(b.clone()))
            } else {
                (tape.constant(w.clone()), tape.constant(b.clone()))
            };
            params.push(wv);
            params.push(bv);
            h = tape.affine(h, wv, bv)?;
            if i < last {
                h = tape.relu(h);
            }
        }
        Ok(MlpVars { output: h, params })
    }

    /// `self <- tau * online + (1 - tau) * self`, elementwise.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if self.sizes != online.sizes {
            return Err(contract("soft update between differently shaped networks"));
        }
        for (t, o) in self.params_mut().into_iter().zip(online.params()) {
            ndarray::Zip::from(t).and(o).for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
        Ok(())
    }

    /// Sum of each row of a batch; small helper for scalar heads.
    pub fn row_sums(m: &Mat) -> Vec<f64> {
        m.sum_axis(Axis(1)).to_vec()
    }
}
