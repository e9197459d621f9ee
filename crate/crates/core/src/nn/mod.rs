//! Differentiable function approximation: MLPs, a reverse-mode tape, Adam, and
//! the squashed-Gaussian policy head.

mod adam;
mod mlp;
mod policy;
mod tape;

pub use adam::Adam;
pub use mlp::{Mlp, MlpVars};
pub use policy::{GaussianHead, HALF_LN_2PI, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS};
pub use tape::{Grads, Mat, Primitive, Tape, Var};
