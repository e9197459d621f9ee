//! Reverse-mode differentiation over a small set of matrix primitives.
//!
//! Values are row-major batches (`rows = batch`, `cols = features`). A [`Tape`]
//! records every operation; [`Tape::backward`] walks it in reverse and returns
//! the gradient of a scalar (1x1) output for every node that requires one.

use std::str::FromStr;

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{contract, Error, Result};

pub type Mat = Array2<f64>;

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// The primitive set losses may be composed of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Affine,
    Relu,
    Tanh,
    Exp,
    Log,
    Min,
    Square,
    Mean,
    Add,
    Sub,
    Mul,
    SumCols,
}

impl Primitive {
    pub fn arity(self) -> usize {
        match self {
            Primitive::Affine => 3,
            Primitive::Min | Primitive::Add | Primitive::Sub | Primitive::Mul => 2,
            _ => 1,
        }
    }
}

impl FromStr for Primitive {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        Ok(match name {
            "affine" => Primitive::Affine,
            "relu" => Primitive::Relu,
            "tanh" => Primitive::Tanh,
            "exp" => Primitive::Exp,
            "log" => Primitive::Log,
            "min" => Primitive::Min,
            "square" => Primitive::Square,
            "mean" => Primitive::Mean,
            "add" => Primitive::Add,
            "sub" => Primitive::Sub,
            "mul" => Primitive::Mul,
            "sum_cols" => Primitive::SumCols,
            other => return Err(contract(format!("unsupported primitive `{other}`"))),
        })
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Affine(Var, Var, Var),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Mean(Var),
    SumCols(Var),
    Min(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    Clamp(Var, f64, f64),
    Concat(Var, Var),
    Cols(Var, usize, usize),
}

struct Node {
    value: Mat,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Grads {
    grads: Vec<Option<Mat>>,
}

impl Grads {
    /// Gradient of the output with respect to `v`, or `None` when `v` does not
    /// influence the output (or does not require a gradient).
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Like [`Grads::get`], but zeros of the right shape for unreached nodes.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Mat {
        self.get(v).cloned().unwrap_or_else(|| Mat::zeros(shape))
    }
}

fn same_shape(tape: &Tape, a: Var, b: Var, what: &str) -> Result<()> {
    let (sa, sb) = (tape.value(a).dim(), tape.value(b).dim());
    if sa != sb {
        return Err(contract(format!("{what}: shape {sa:?} vs {sb:?}")));
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A trainable leaf (parameter).
    pub fn param(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant leaf; no gradient flows into it.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    /// Applies a primitive by name-checked identity. Errors on arity mismatch.
    pub fn apply(&mut self, prim: Primitive, args: &[Var]) -> Result<Var> {
        if args.len() != prim.arity() {
            return Err(contract(format!("{prim:?} takes {} operand(s), got {}", prim.arity(), args.len())));
        }
        match prim {
            Primitive::Affine => self.affine(args[0], args[1], args[2]),
            Primitive::Relu => Ok(self.relu(args[0])),
            Primitive::Tanh => Ok(self.tanh(args[0])),
            Primitive::Exp => Ok(self.exp(args[0])),
            Primitive::Log => Ok(self.log(args[0])),
            Primitive::Square => Ok(self.square(args[0])),
            Primitive::Mean => Ok(self.mean(args[0])),
            Primitive::SumCols => Ok(self.sum_cols(args[0])),
            Primitive::Min => self.min(args[0], args[1]),
            Primitive::Add => self.add(args[0], args[1]),
            Primitive::Sub => self.sub(args[0], args[1]),
            Primitive::Mul => self.mul(args[0], args[1]),
        }
    }

    /// `x · w + b`, with `b` a 1 x out row broadcast over the batch.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.ncols() != wv.nrows() || bv.nrows() != 1 || bv.ncols() != wv.ncols() {
            return Err(contract(format!("affine: input {:?}, weight {:?}, bias {:?}", xv.dim(), wv.dim(), bv.dim())));
        }
        let mut out = xv.dot(wv);
        out += bv;
        let ng = self.ng(x) || self.ng(w) || self.ng(b);
        Ok(self.push(out, Op::Affine(x, w, b), ng))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(a).mapv(f);
        let ng = self.ng(a);
        self.push(out, op, ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |v| v.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |v| v * v, Op::Square(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |v| v * c, Op::Scale(a, c))
    }

    pub fn shift(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |v| v + c, Op::Shift(a))
    }

    /// Hard clamp; the gradient is zero where the bound is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |v| v.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    /// Mean over every entry; yields 1x1.
    pub fn mean(&mut self, a: Var) -> Var {
        let m = self.value(a).mean().unwrap_or(0.0);
        let ng = self.ng(a);
        self.push(Mat::from_elem((1, 1), m), Op::Mean(a), ng)
    }

    /// Per-row sum; yields rows x 1.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let out = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ng = self.ng(a);
        self.push(out, Op::SumCols(a), ng)
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op, what: &str) -> Result<Var> {
        same_shape(self, a, b, what)?;
        let out = Zip::from(self.value(a)).and(self.value(b)).map_collect(|&x, &y| f(x, y));
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, op, ng))
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, f64::min, Op::Min(a, b), "min")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b), "mul")
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.nrows() != bv.nrows() {
            return Err(contract(format!("concat: {} rows vs {}", av.nrows(), bv.nrows())));
        }
        let out = ndarray::concatenate(Axis(1), &[av.view(), bv.view()]).expect("row counts checked");
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Concat(a, b), ng))
    }

    /// Columns `start..end` of `a`.
    pub fn cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let av = self.value(a);
        if start > end || end > av.ncols() {
            return Err(contract(format!("cols {start}..{end} of {} columns", av.ncols())));
        }
        let out = av.slice(s![.., start..end]).to_owned();
        let ng = self.ng(a);
        Ok(self.push(out, Op::Cols(a, start, end), ng))
    }

    /// Gradients of the 1x1 node `out` with respect to every node.
    pub fn backward(&self, out: Var) -> Result<Grads> {
        if self.value(out).dim() != (1, 1) {
            return Err(contract("backward requires a scalar (1x1) output"));
        }
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(Mat::ones((1, 1)));

        for idx in (0..=out.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Affine(x, w, b) => {
                    if self.ng(x) {
                        accumulate(&mut grads, x, g.dot(&self.value(w).t()));
                    }
                    if self.ng(w) {
                        accumulate(&mut grads, w, self.value(x).t().dot(&g));
                    }
                    if self.ng(b) {
                        accumulate(&mut grads, b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                }
                Op::Relu(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(self.value(a)).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0;
                        }
                    });
                    accumulate(&mut grads, a, d);
                }
                Op::Tanh(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= 1.0 - y * y);
                    accumulate(&mut grads, a, d);
                }
                Op::Exp(a) => {
                    accumulate(&mut grads, a, g * &node.value);
                }
                Op::Log(a) => {
                    accumulate(&mut grads, a, g / self.value(a));
                }
                Op::Square(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(self.value(a)).for_each(|d, &x| *d *= 2.0 * x);
                    accumulate(&mut grads, a, d);
                }
                Op::Scale(a, c) => accumulate(&mut grads, a, g * c),
                Op::Shift(a) => accumulate(&mut grads, a, g),
                Op::Clamp(a, lo, hi) => {
                    let mut d = g;
                    Zip::from(&mut d).and(self.value(a)).for_each(|d, &x| {
                        if x < lo || x > hi {
                            *d = 0.0;
                        }
                    });
                    accumulate(&mut grads, a, d);
                }
                Op::Mean(a) => {
                    let av = self.value(a);
                    let n = av.len().max(1) as f64;
                    accumulate(&mut grads, a, Mat::from_elem(av.dim(), g[[0, 0]] / n));
                }
                Op::SumCols(a) => {
                    let av = self.value(a);
                    let d = g.broadcast(av.dim()).expect("rows x 1 broadcasts").to_owned();
                    accumulate(&mut grads, a, d);
                }
                Op::Min(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    if self.ng(a) {
                        let mut d = g.clone();
                        Zip::from(&mut d).and(av).and(bv).for_each(|d, &x, &y| {
                            if x > y {
                                *d = 0.0;
                            }
                        });
                        accumulate(&mut grads, a, d);
                    }
                    if self.ng(b) {
                        let mut d = g;
                        Zip::from(&mut d).and(av).and(bv).for_each(|d, &x, &y| {
                            if x <= y {
                                *d = 0.0;
                            }
                        });
                        accumulate(&mut grads, b, d);
                    }
                }
                Op::Add(a, b) => {
                    if self.ng(a) {
                        accumulate(&mut grads, a, g.clone());
                    }
                    if self.ng(b) {
                        accumulate(&mut grads, b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.ng(a) {
                        accumulate(&mut grads, a, g.clone());
                    }
                    if self.ng(b) {
                        accumulate(&mut grads, b, -g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.ng(a) {
                        accumulate(&mut grads, a, &g * self.value(b));
                    }
                    if self.ng(b) {
                        accumulate(&mut grads, b, g * self.value(a));
                    }
                }
                Op::Concat(a, b) => {
                    let na = self.value(a).ncols();
                    if self.ng(a) {
                        accumulate(&mut grads, a, g.slice(s![.., ..na]).to_owned());
                    }
                    if self.ng(b) {
                        accumulate(&mut grads, b, g.slice(s![.., na..]).to_owned());
                    }
                }
                Op::Cols(a, start, end) => {
                    let mut d = Mat::zeros(self.value(a).dim());
                    d.slice_mut(s![.., start..end]).assign(&g);
                    accumulate(&mut grads, a, d);
                }
            }
        }
        // Only leaves keep their gradients; interior entries were consumed.
        Ok(Grads { grads })
    }
}

fn accumulate(grads: &mut [Option<Mat>], v: Var, d: Mat) {
    match &mut grads[v.0] {
        Some(g) => *g += &d,
        slot @ None => *slot = Some(d),
    }
}
