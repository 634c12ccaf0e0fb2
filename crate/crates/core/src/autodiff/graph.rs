use std::rc::Rc;

use super::{ops, ParamId, ParamStore, Rng, Tensor, TensorError};

/// The primitive operations every network in this crate is written against.
///
/// Two implementations exist: [`Tape`](super::Tape) records each operation
/// for reverse-mode differentiation, and [`Eval`] only computes values.
/// Model code is generic over `Graph` so both paths run the same arithmetic.
pub trait Graph {
    type Var: Clone;

    fn params(&self) -> &ParamStore;

    fn value<'a>(&'a self, v: &'a Self::Var) -> &'a Tensor;

    /// A non-trainable input.
    fn constant(&mut self, t: Tensor) -> Self::Var;

    fn param(&mut self, id: ParamId) -> Self::Var;

    fn lookup_row(&mut self, table: ParamId, row: usize) -> Result<Self::Var, TensorError>;

    fn add(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var, TensorError>;

    /// Elementwise product.
    fn mul(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var, TensorError>;

    fn matvec(&mut self, m: &Self::Var, x: &Self::Var) -> Result<Self::Var, TensorError>;

    /// `w x + b`.
    fn affine(&mut self, w: &Self::Var, x: &Self::Var, b: &Self::Var) -> Result<Self::Var, TensorError>;

    fn concat(&mut self, parts: &[Self::Var]) -> Result<Self::Var, TensorError>;

    fn tanh(&mut self, a: &Self::Var) -> Result<Self::Var, TensorError>;

    fn logistic(&mut self, a: &Self::Var) -> Result<Self::Var, TensorError>;

    /// Scalar `-log softmax(logits)[gold]`.
    fn softmax_xent(&mut self, logits: &Self::Var, gold: usize) -> Result<Self::Var, TensorError>;

    /// `a + eps`, `eps ~ N(0, sigma^2)` elementwise. Differentiates as identity.
    fn gaussian_noise(&mut self, a: &Self::Var, sigma: f64, rng: &mut Rng) -> Result<Self::Var, TensorError>;

    /// Elementwise sum of same-shaped inputs.
    fn sum(&mut self, parts: &[Self::Var]) -> Result<Self::Var, TensorError>;

    fn zeros(&mut self, len: usize) -> Self::Var {
        self.constant(Tensor::zeros(&[len]))
    }
}

/// Value handle of the tape-free graph.
#[derive(Clone, Debug)]
pub enum EvalVar {
    Param(ParamId),
    Value(Rc<Tensor>),
}

/// Tape-free evaluation for inference and finite differences.
pub struct Eval<'p> {
    params: &'p ParamStore,
}

impl<'p> Eval<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Eval { params }
    }
}

fn wrap(t: Tensor) -> EvalVar {
    EvalVar::Value(Rc::new(t))
}

impl<'p> Graph for Eval<'p> {
    type Var = EvalVar;

    fn params(&self) -> &ParamStore {
        self.params
    }

    fn value<'a>(&'a self, v: &'a EvalVar) -> &'a Tensor {
        match v {
            EvalVar::Param(id) => self.params.tensor(*id),
            EvalVar::Value(t) => t,
        }
    }

    fn constant(&mut self, t: Tensor) -> EvalVar {
        wrap(t)
    }

    fn param(&mut self, id: ParamId) -> EvalVar {
        EvalVar::Param(id)
    }

    fn lookup_row(&mut self, table: ParamId, row: usize) -> Result<EvalVar, TensorError> {
        ops::lookup_row(self.params.tensor(table), row).map(wrap)
    }

    fn add(&mut self, a: &EvalVar, b: &EvalVar) -> Result<EvalVar, TensorError> {
        ops::add(self.value(a), self.value(b)).map(wrap)
    }

    fn mul(&mut self, a: &EvalVar, b: &EvalVar) -> Result<EvalVar, TensorError> {
        ops::mul(self.value(a), self.value(b)).map(wrap)
    }

    fn matvec(&mut self, m: &EvalVar, x: &EvalVar) -> Result<EvalVar, TensorError> {
        ops::matvec(self.value(m), self.value(x)).map(wrap)
    }

    fn affine(&mut self, w: &EvalVar, x: &EvalVar, b: &EvalVar) -> Result<EvalVar, TensorError> {
        ops::affine(self.value(w), self.value(x), self.value(b)).map(wrap)
    }

    fn concat(&mut self, parts: &[EvalVar]) -> Result<EvalVar, TensorError> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.value(p)).collect();
        ops::concat(&refs).map(wrap)
    }

    fn tanh(&mut self, a: &EvalVar) -> Result<EvalVar, TensorError> {
        ops::tanh(self.value(a)).map(wrap)
    }

    fn logistic(&mut self, a: &EvalVar) -> Result<EvalVar, TensorError> {
        ops::logistic(self.value(a)).map(wrap)
    }

    fn softmax_xent(&mut self, logits: &EvalVar, gold: usize) -> Result<EvalVar, TensorError> {
        ops::softmax_xent(self.value(logits), gold).map(|(l, _)| wrap(l))
    }

    fn gaussian_noise(&mut self, a: &EvalVar, sigma: f64, rng: &mut Rng) -> Result<EvalVar, TensorError> {
        ops::gaussian_noise(self.value(a), sigma, rng).map(wrap)
    }

    fn sum(&mut self, parts: &[EvalVar]) -> Result<EvalVar, TensorError> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.value(p)).collect();
        ops::sum(&refs).map(wrap)
    }
}
