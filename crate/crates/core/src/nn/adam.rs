use super::tape::Mat;
use crate::error::{contract, Result};

/// Bias-corrected Adam over a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    pub first_moment: Vec<Mat>,
    pub second_moment: Vec<Mat>,
}

impl Adam {
    pub fn new(lr: f64, shapes: &[(usize, usize)]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment: shapes.iter().map(|&s| Mat::zeros(s)).collect(),
            second_moment: shapes.iter().map(|&s| Mat::zeros(s)).collect(),
        }
    }

    pub fn for_params(lr: f64, params: &[&Mat]) -> Self {
        let shapes: Vec<_> = params.iter().map(|p| p.dim()).collect();
        Self::new(lr, &shapes)
    }

    pub fn step(&mut self, params: &mut [&mut Mat], grads: &[Mat]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(contract(format!(
                "adam: {} moments, {} params, {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            if p.dim() != g.dim() || p.dim() != m.dim() {
                return Err(contract(format!("adam: shape {:?} vs grad {:?}", p.dim(), g.dim())));
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let (lr, eps) = (self.lr, self.eps);
        for (((p, g), m), v) in
            params.iter_mut().zip(grads).zip(self.first_moment.iter_mut()).zip(self.second_moment.iter_mut())
        {
            ndarray::Zip::from(&mut **p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
        Ok(())
    }
}
