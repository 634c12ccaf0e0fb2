//! Recording graph and reverse-mode accumulation.
//!
//! Nodes are appended in evaluation order, so parents always precede their
//! children and a reverse sweep over the node list is a valid reverse
//! topological order.

use super::ops::{self, axpy};
use super::{Gradients, Graph, ParamId, ParamStore, Rng, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn node_id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamId),
    LookupRow(ParamId, usize),
    Add(usize, usize),
    Mul(usize, usize),
    MatVec(usize, usize),
    Affine(usize, usize, usize),
    Concat(Vec<usize>),
    Tanh(usize),
    Logistic(usize),
    /// Parent and the cached softmax.
    SoftmaxXent(usize, usize, Vec<f64>),
    Noise(usize),
    Sum(Vec<usize>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::LookupRow(..) => "lookup_row",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::MatVec(..) => "matvec",
            Op::Affine(..) => "affine",
            Op::Concat(_) => "concat",
            Op::Tanh(_) => "tanh",
            Op::Logistic(_) => "logistic",
            Op::SoftmaxXent(..) => "softmax_xent",
            Op::Noise(_) => "gaussian_noise",
            Op::Sum(_) => "sum",
        }
    }
}

struct Node {
    op: Op,
    // None for parameter leaves; their value lives in the store.
    value: Option<Tensor>,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<usize>>,
    grads: Vec<Option<Vec<f64>>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape { params, nodes: Vec::new(), param_nodes: vec![None; params.len()], grads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    /// Gradient of the last `backward` loss with respect to `v`, if `v` was reachable.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn node_value(&self, i: usize) -> &Tensor {
        let node = &self.nodes[i];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.tensor(*id),
            (None, _) => unreachable!("only parameter nodes store no value"),
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value: Some(value) });
        Var(self.nodes.len() - 1)
    }

    /// Reverse sweep from the scalar `loss`.
    ///
    /// Node gradients are kept on the tape (see [`Tape::grad`]); parameter
    /// gradients are returned, row-sparse for embedding lookups.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, TensorError> {
        if loss.0 >= self.nodes.len() {
            return Err(TensorError::UnknownNode(loss.0));
        }
        let lv = self.node_value(loss.0);
        if !lv.is_scalar() {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::with_len(self.params.len());

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param(id) => {
                    let cols = self.params.tensor(*id).cols();
                    out.accumulate_dense(*id, &g, cols);
                }
                Op::LookupRow(id, row) => {
                    let cols = self.params.tensor(*id).cols();
                    out.accumulate_row(*id, *row, &g, cols);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let ga: Vec<f64> = g.iter().zip(self.node_value(b).data()).map(|(g, y)| g * y).collect();
                    let gb: Vec<f64> = g.iter().zip(self.node_value(a).data()).map(|(g, x)| g * x).collect();
                    accumulate(&mut grads, a, &ga);
                    accumulate(&mut grads, b, &gb);
                }
                Op::MatVec(m, x) => {
                    self.matvec_backward(&mut grads, *m, *x, &g);
                }
                Op::Affine(w, x, b) => {
                    self.matvec_backward(&mut grads, *w, *x, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.node_value(p).len();
                        accumulate(&mut grads, p, &g[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::Tanh(a) => {
                    let y = self.nodes[i].value.as_ref().expect("tanh value").data();
                    let ga: Vec<f64> = g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Logistic(a) => {
                    let y = self.nodes[i].value.as_ref().expect("logistic value").data();
                    let ga: Vec<f64> = g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::SoftmaxXent(a, gold, probs) => {
                    let scale = g[0];
                    let mut ga: Vec<f64> = probs.iter().map(|p| scale * p).collect();
                    ga[*gold] -= scale;
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Noise(a) => accumulate(&mut grads, *a, &g),
                Op::Sum(parts) => {
                    for &p in parts {
                        accumulate(&mut grads, p, &g);
                    }
                }
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(out)
    }

    fn matvec_backward(&self, grads: &mut [Option<Vec<f64>>], m: usize, x: usize, g: &[f64]) {
        let mv = self.node_value(m);
        let xv = self.node_value(x).data();
        let cols = mv.cols();
        // dL/dx = M^T g
        let mut gx = vec![0.0; cols];
        for (r, &gr) in g.iter().enumerate() {
            if gr != 0.0 {
                axpy(gr, mv.row(r), &mut gx);
            }
        }
        // dL/dM = g x^T
        let slot = grads[m].get_or_insert_with(|| vec![0.0; mv.len()]);
        for (r, &gr) in g.iter().enumerate() {
            if gr != 0.0 {
                axpy(gr, xv, &mut slot[r * cols..(r + 1) * cols]);
            }
        }
        accumulate(grads, x, &gx);
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], i: usize, g: &[f64]) {
    match &mut grads[i] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

impl<'p> Graph for Tape<'p> {
    type Var = Var;

    fn params(&self) -> &ParamStore {
        self.params
    }

    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor {
        self.node_value(v.0)
    }

    fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Constant, t)
    }

    fn param(&mut self, id: ParamId) -> Var {
        if let Some(node) = self.param_nodes[id.index()] {
            return Var(node);
        }
        self.nodes.push(Node { op: Op::Param(id), value: None });
        let node = self.nodes.len() - 1;
        self.param_nodes[id.index()] = Some(node);
        Var(node)
    }

    fn lookup_row(&mut self, table: ParamId, row: usize) -> Result<Var, TensorError> {
        let t = ops::lookup_row(self.params.tensor(table), row)?;
        Ok(self.push(Op::LookupRow(table, row), t))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var, TensorError> {
        let t = ops::add(self.value(a), self.value(b))?;
        Ok(self.push(Op::Add(a.0, b.0), t))
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var, TensorError> {
        let t = ops::mul(self.value(a), self.value(b))?;
        Ok(self.push(Op::Mul(a.0, b.0), t))
    }

    fn matvec(&mut self, m: &Var, x: &Var) -> Result<Var, TensorError> {
        let t = ops::matvec(self.value(m), self.value(x))?;
        Ok(self.push(Op::MatVec(m.0, x.0), t))
    }

    fn affine(&mut self, w: &Var, x: &Var, b: &Var) -> Result<Var, TensorError> {
        let t = ops::affine(self.value(w), self.value(x), self.value(b))?;
        Ok(self.push(Op::Affine(w.0, x.0, b.0), t))
    }

    fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.value(p)).collect();
        let t = ops::concat(&refs)?;
        Ok(self.push(Op::Concat(parts.iter().map(|p| p.0).collect()), t))
    }

    fn tanh(&mut self, a: &Var) -> Result<Var, TensorError> {
        let t = ops::tanh(self.value(a))?;
        Ok(self.push(Op::Tanh(a.0), t))
    }

    fn logistic(&mut self, a: &Var) -> Result<Var, TensorError> {
        let t = ops::logistic(self.value(a))?;
        Ok(self.push(Op::Logistic(a.0), t))
    }

    fn softmax_xent(&mut self, logits: &Var, gold: usize) -> Result<Var, TensorError> {
        let (t, probs) = ops::softmax_xent(self.value(logits), gold)?;
        Ok(self.push(Op::SoftmaxXent(logits.0, gold, probs), t))
    }

    fn gaussian_noise(&mut self, a: &Var, sigma: f64, rng: &mut Rng) -> Result<Var, TensorError> {
        let t = ops::gaussian_noise(self.value(a), sigma, rng)?;
        Ok(self.push(Op::Noise(a.0), t))
    }

    fn sum(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.value(p)).collect();
        let t = ops::sum(&refs)?;
        Ok(self.push(Op::Sum(parts.iter().map(|p| p.0).collect()), t))
    }
}
