use std::collections::{BTreeMap, HashMap};

use super::{Rng, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Named parameters of one model, in registration order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId, TensorError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(TensorError::DuplicateName(name));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter { name, tensor, trainable: true });
        Ok(id)
    }

    /// Registers a matrix with Glorot-uniform entries in ±sqrt(6 / (rows + cols)).
    pub fn add_glorot(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut Rng,
    ) -> Result<ParamId, TensorError> {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.uniform_range(-bound, bound)).collect();
        self.add(name, Tensor::from_parts(vec![rows, cols], data))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<ParamId, TensorError> {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].tensor
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    /// Total number of scalar entries.
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }
}

/// Gradient of one parameter: dense, or row-sparse for embedding tables.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamGrad {
    Dense(Vec<f64>),
    Rows(BTreeMap<usize, Vec<f64>>),
}

impl ParamGrad {
    /// Value of the gradient at flat index `i` of a parameter with `cols` columns.
    pub fn at(&self, i: usize, cols: usize) -> f64 {
        match self {
            ParamGrad::Dense(g) => g[i],
            ParamGrad::Rows(rows) => rows.get(&(i / cols)).map_or(0.0, |r| r[i % cols]),
        }
    }

    pub fn to_dense(&self, len: usize, cols: usize) -> Vec<f64> {
        match self {
            ParamGrad::Dense(g) => g.clone(),
            ParamGrad::Rows(rows) => {
                let mut out = vec![0.0; len];
                for (&r, g) in rows {
                    out[r * cols..(r + 1) * cols].copy_from_slice(g);
                }
                out
            }
        }
    }
}

/// Parameter gradients produced by one backward pass.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: Vec<Option<ParamGrad>>,
}

impl Gradients {
    pub(crate) fn with_len(n: usize) -> Self {
        Gradients { grads: vec![None; n] }
    }

    pub fn get(&self, id: ParamId) -> Option<&ParamGrad> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub(crate) fn accumulate_dense(&mut self, id: ParamId, g: &[f64], cols: usize) {
        let slot = &mut self.grads[id.0];
        match slot {
            None => *slot = Some(ParamGrad::Dense(g.to_vec())),
            Some(ParamGrad::Dense(acc)) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            Some(ParamGrad::Rows(rows)) => {
                let mut dense = g.to_vec();
                for (&r, rg) in rows.iter() {
                    dense[r * cols..(r + 1) * cols].iter_mut().zip(rg).for_each(|(a, b)| *a += b);
                }
                *slot = Some(ParamGrad::Dense(dense));
            }
        }
    }

    pub(crate) fn accumulate_row(&mut self, id: ParamId, row: usize, g: &[f64], cols: usize) {
        let slot = &mut self.grads[id.0];
        match slot {
            None => {
                let mut rows = BTreeMap::new();
                rows.insert(row, g.to_vec());
                *slot = Some(ParamGrad::Rows(rows));
            }
            Some(ParamGrad::Rows(rows)) => {
                let acc = rows.entry(row).or_insert_with(|| vec![0.0; g.len()]);
                acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            Some(ParamGrad::Dense(acc)) => {
                acc[row * cols..(row + 1) * cols].iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
        }
    }
}

/// One plain SGD update, `p <- p - lr * grad`, for every trainable parameter.
///
/// The gradients are consumed. A trainable parameter with no gradient is an
/// error and leaves the store untouched.
pub fn sgd_step(store: &mut ParamStore, grads: Gradients, lr: f64) -> Result<(), TensorError> {
    if let Some((_, p)) = store
        .iter()
        .find(|(id, p)| p.trainable && grads.get(*id).is_none())
    {
        return Err(TensorError::MissingGradient(p.name.clone()));
    }
    for (i, grad) in grads.grads.into_iter().enumerate() {
        let param = &mut store.params[i];
        if !param.trainable {
            continue;
        }
        let cols = param.tensor.cols();
        let values = param.tensor.data_mut();
        match grad {
            Some(ParamGrad::Dense(g)) => {
                values.iter_mut().zip(&g).for_each(|(p, g)| *p -= lr * g);
            }
            Some(ParamGrad::Rows(rows)) => {
                for (r, g) in rows {
                    values[r * cols..(r + 1) * cols]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(p, g)| *p -= lr * g);
                }
            }
            None => unreachable!("checked above"),
        }
        if !param.tensor.all_finite() {
            return Err(TensorError::NonFinite { op: "sgd_step" });
        }
    }
    Ok(())
}
