//! Dense `f64` tensors, a recording tape for reverse-mode gradients, and SGD.

mod gradcheck;
mod graph;
pub mod ops;
mod params;
mod rng;
mod tape;
mod tensor;

use thiserror::Error;

pub use gradcheck::{gradient_check, Coords, GradCheck, Objective};
pub use graph::{Eval, EvalVar, Graph};
pub use params::{sgd_step, Gradients, ParamGrad, ParamId, ParamStore, Parameter};
pub use rng::Rng;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("index {index} out of range in {op} (size {size})")]
    IndexOutOfRange { op: &'static str, index: usize, size: usize },
    #[error("non-finite value in {op}")]
    NonFinite { op: &'static str },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("node {0} is not on this tape")]
    UnknownNode(usize),
    #[error("no gradient for trainable parameter `{0}`")]
    MissingGradient(String),
    #[error("parameter name `{0}` already registered")]
    DuplicateName(String),
    #[error("{0}")]
    InvalidArgument(String),
}
