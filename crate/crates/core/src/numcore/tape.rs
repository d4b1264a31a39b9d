//! Dynamic reverse-mode tape.
//!
//! Every forward operation appends a node holding its value and the
//! operation that produced it. `backward` walks the nodes in reverse,
//! skipping any node that no trainable leaf feeds into.

use std::collections::HashMap;
use std::ops::{Deref, DerefMut};

use super::{ParamStore, Tensor2};
use crate::error::{Error, Result};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Mul,
    Tanh,
    Sigmoid,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddColumn(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Scale(Var, f64),
    Sum(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor2,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor2> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn accumulate(slot: &mut Option<Tensor2>, g: Tensor2) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
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

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Tensor2 {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor2, op: Op, parents: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Numeric(format!("{op:?} produced a non-finite value")));
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Leaf that receives a gradient.
    pub fn leaf(&mut self, value: Tensor2) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor2) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push(v, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        self.push(v, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        self.push(v, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).mul(self.value(b))?;
        self.push(v, Op::Mul(a, b), &[a, b])
    }

    /// Adds column vector `bias` to every column of `a`.
    pub fn add_column(&mut self, a: Var, bias: Var) -> Result<Var> {
        let v = self.value(a).add_column(self.value(bias))?;
        self.push(v, Op::AddColumn(a, bias), &[a, bias])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).tanh();
        self.push(v, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).sigmoid();
        self.push(v, Op::Sigmoid(a), &[a])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let v = self.value(a).scale(factor);
        self.push(v, Op::Scale(a, factor), &[a])
    }

    pub fn elementwise(&mut self, op: Elementwise, args: &[Var]) -> Result<Var> {
        match (op, args) {
            (Elementwise::Add, [a, b]) => self.add(*a, *b),
            (Elementwise::Mul, [a, b]) => self.mul(*a, *b),
            (Elementwise::Tanh, [a]) => self.tanh(*a),
            (Elementwise::Sigmoid, [a]) => self.sigmoid(*a),
            _ => Err(Error::Contract(format!(
                "{op:?} called with {} arguments",
                args.len()
            ))),
        }
    }

    /// Element-wise sum of same-shaped operands, accumulated left to right.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("sum of zero operands".into()))?;
        let mut acc = self.value(first).clone();
        for &p in &parts[1..] {
            acc.add_assign(self.value(p))?;
        }
        self.push(acc, Op::Sum(parts.to_vec()), parts)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor2> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor2::concat_rows(&values)?;
        self.push(v, Op::ConcatRows(parts.to_vec()), parts)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let v = self.value(a).slice_rows(start, len)?;
        self.push(v, Op::SliceRows(a, start), &[a])
    }

    /// Mean of all entries as a 1×1 tensor.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let n = t.data().len();
        if n == 0 {
            return Err(Error::Contract("mean of empty tensor".into()));
        }
        let v = Tensor2::filled(1, 1, t.sum() / n as f64);
        self.push(v, Op::Mean(a), &[a])
    }

    /// Mean squared difference between `pred` and `target` (1×1).
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let d = self.sub(pred, target)?;
        let sq = self.mul(d, d)?;
        self.mean(sq)
    }

    /// Reverse pass from the scalar `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar output, got {:?}",
                out.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor2>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor2::filled(1, 1, 1.0));
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let needs = |v: &Var| self.nodes[v.0].requires_grad;
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    if needs(a) {
                        let da = g.matmul_t(self.value(*b))?;
                        accumulate(&mut grads[a.0], da);
                    }
                    if needs(b) {
                        let db = self.value(*a).t_matmul(&g)?;
                        accumulate(&mut grads[b.0], db);
                    }
                }
                Op::Add(a, b) => {
                    if needs(a) {
                        accumulate(&mut grads[a.0], g.clone());
                    }
                    if needs(b) {
                        accumulate(&mut grads[b.0], g);
                    }
                }
                Op::Sub(a, b) => {
                    if needs(a) {
                        accumulate(&mut grads[a.0], g.clone());
                    }
                    if needs(b) {
                        accumulate(&mut grads[b.0], g.scale(-1.0));
                    }
                }
                Op::Mul(a, b) => {
                    if needs(a) {
                        accumulate(&mut grads[a.0], g.mul(self.value(*b))?);
                    }
                    if needs(b) {
                        accumulate(&mut grads[b.0], g.mul(self.value(*a))?);
                    }
                }
                Op::AddColumn(a, bias) => {
                    if needs(bias) {
                        accumulate(&mut grads[bias.0], g.sum_columns());
                    }
                    if needs(a) {
                        accumulate(&mut grads[a.0], g);
                    }
                }
                Op::Tanh(a) => {
                    if needs(a) {
                        let d = g.zip_with(&node.value, "tanh_grad", |g, y| g * (1.0 - y * y))?;
                        accumulate(&mut grads[a.0], d);
                    }
                }
                Op::Sigmoid(a) => {
                    if needs(a) {
                        let d = g.zip_with(&node.value, "sigmoid_grad", |g, y| g * y * (1.0 - y))?;
                        accumulate(&mut grads[a.0], d);
                    }
                }
                Op::Scale(a, factor) => {
                    if needs(a) {
                        accumulate(&mut grads[a.0], g.scale(*factor));
                    }
                }
                Op::Sum(parts) => {
                    for p in parts {
                        if needs(p) {
                            accumulate(&mut grads[p.0], g.clone());
                        }
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let rows = self.value(*p).rows();
                        if needs(p) {
                            accumulate(&mut grads[p.0], g.slice_rows(start, rows)?);
                        }
                        start += rows;
                    }
                }
                Op::SliceRows(a, start) => {
                    if needs(a) {
                        let (rows, cols) = self.shape(*a);
                        let mut full = Tensor2::zeros(rows, cols);
                        let off = start * cols;
                        full.data_mut()[off..off + g.data().len()].copy_from_slice(g.data());
                        accumulate(&mut grads[a.0], full);
                    }
                }
                Op::Mean(a) => {
                    if needs(a) {
                        let (rows, cols) = self.shape(*a);
                        let n = (rows * cols) as f64;
                        accumulate(&mut grads[a.0], Tensor2::filled(rows, cols, g.get(0, 0) / n));
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Which parameters of a store receive gradients.
pub enum Trainable<'a> {
    All,
    None,
    Only(Box<dyn Fn(&str) -> bool + 'a>),
}

impl Trainable<'_> {
    fn includes(&self, name: &str) -> bool {
        match self {
            Trainable::All => true,
            Trainable::None => false,
            Trainable::Only(f) => f(name),
        }
    }
}

/// A tape bound to a parameter store.
///
/// Parameters are pulled onto the tape lazily by name; frozen parameters
/// enter as constants so backward never visits the subgraphs that only
/// depend on them.
pub struct Graph<'a> {
    tape: Tape,
    store: &'a ParamStore,
    trainable: Trainable<'a>,
    bound: HashMap<String, Var>,
    order: Vec<String>,
}

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParamStore, trainable: Trainable<'a>) -> Self {
        Self {
            tape: Tape::new(),
            store,
            trainable,
            bound: HashMap::new(),
            order: Vec::new(),
        }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let value = self.store.value(name)?.clone();
        let v = if self.trainable.includes(name) {
            self.tape.leaf(value)
        } else {
            self.tape.constant(value)
        };
        self.bound.insert(name.to_string(), v);
        self.order.push(name.to_string());
        Ok(v)
    }

    /// Gradients of `loss` for every bound trainable parameter, in binding
    /// order. Parameters the loss does not reach get zeros.
    pub fn gradients(&self, loss: Var) -> Result<Vec<(String, Tensor2)>> {
        let grads = self.tape.backward(loss)?;
        let mut out = Vec::new();
        for name in &self.order {
            if !self.trainable.includes(name) {
                continue;
            }
            let v = self.bound[name];
            let g = match grads.get(v) {
                Some(g) => g.clone(),
                None => {
                    let (r, c) = self.tape.shape(v);
                    Tensor2::zeros(r, c)
                }
            };
            out.push((name.clone(), g));
        }
        Ok(out)
    }
}

impl Deref for Graph<'_> {
    type Target = Tape;
    fn deref(&self) -> &Tape {
        &self.tape
    }
}

impl DerefMut for Graph<'_> {
    fn deref_mut(&mut self) -> &mut Tape {
        &mut self.tape
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor2 {
        Tensor2::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_backward_formulas() {
        let mut tape = Tape::new();
        let a = tape.leaf(t(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let b = tape.leaf(t(&[vec![5.0, 6.0], vec![7.0, 8.0]]));
        let c = tape.matmul(a, b).unwrap();
        let s = tape.mean(c).unwrap();
        let loss = tape.scale(s, 4.0).unwrap();
        let grads = tape.backward(loss).unwrap();
        // dC = ones; dA = ones·Bᵀ, dB = Aᵀ·ones
        assert_eq!(grads.get(a).unwrap().data(), &[11.0, 15.0, 11.0, 15.0]);
        assert_eq!(grads.get(b).unwrap().data(), &[4.0, 4.0, 6.0, 6.0]);
    }

    #[test]
    fn elementwise_semantics() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor2::zeros(2, 3));
        let th = tape.elementwise(Elementwise::Tanh, &[z]).unwrap();
        assert_eq!(tape.value(th), &Tensor2::zeros(2, 3));
        let sg = tape.elementwise(Elementwise::Sigmoid, &[z]).unwrap();
        assert_eq!(tape.value(sg), &Tensor2::filled(2, 3, 0.5));
        let a = tape.constant(t(&[vec![1.0, 2.0]]));
        let b = tape.constant(t(&[vec![3.0, 4.0]]));
        let s = tape.elementwise(Elementwise::Add, &[a, b]).unwrap();
        assert_eq!(tape.value(s).data(), &[4.0, 6.0]);
        assert!(tape.elementwise(Elementwise::Add, &[a, sg]).is_err());
        assert!(tape.elementwise(Elementwise::Tanh, &[a, b]).is_err());
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(t(&[vec![2.0]]));
        let k = tape.constant(t(&[vec![3.0]]));
        let p = tape.mul(a, k).unwrap();
        let g = tape.backward(p).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[3.0]);
        assert!(g.get(k).is_none());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor2::zeros(2, 1));
        assert!(tape.backward(a).is_err());
    }

    #[test]
    fn slice_and_concat_route_gradients() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor2::column(&[1.0, 2.0]));
        let b = tape.leaf(Tensor2::column(&[3.0]));
        let c = tape.concat_rows(&[a, b]).unwrap();
        let s = tape.slice_rows(c, 1, 2).unwrap();
        let w = tape.constant(Tensor2::column(&[10.0, 100.0]));
        let p = tape.mul(s, w).unwrap();
        let loss = tape.mean(p).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[0.0, 5.0]);
        assert_eq!(g.get(b).unwrap().data(), &[50.0]);
    }

    #[test]
    fn non_finite_results_are_rejected() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor2::column(&[f64::MAX]));
        assert!(matches!(tape.add(a, a), Err(Error::Numeric(_))));
    }
}
