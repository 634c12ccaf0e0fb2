//! Forward kernels shared by the taped and tape-free graphs.

use super::{Rng, Tensor, TensorError};

fn mismatch(op: &'static str, detail: String) -> TensorError {
    TensorError::ShapeMismatch { op, detail }
}

fn finite(op: &'static str, data: Vec<f64>, shape: Vec<usize>) -> Result<Tensor, TensorError> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(TensorError::NonFinite { op });
    }
    Ok(Tensor::from_parts(shape, data))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), TensorError> {
    if a.shape() != b.shape() {
        return Err(mismatch(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    same_shape("add", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    finite("add", data, a.shape().to_vec())
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    same_shape("mul", a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    finite("mul", data, a.shape().to_vec())
}

fn check_matvec(op: &'static str, m: &Tensor, x: &Tensor) -> Result<(), TensorError> {
    if !m.is_matrix() || !x.is_vector() || m.cols() != x.len() {
        return Err(mismatch(op, format!("matrix {:?} times vector {:?}", m.shape(), x.shape())));
    }
    Ok(())
}

pub fn matvec(m: &Tensor, x: &Tensor) -> Result<Tensor, TensorError> {
    check_matvec("matvec", m, x)?;
    let data = (0..m.rows()).map(|r| dot(m.row(r), x.data())).collect();
    finite("matvec", data, vec![m.rows()])
}

pub fn affine(w: &Tensor, x: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    check_matvec("affine", w, x)?;
    if !b.is_vector() || b.len() != w.rows() {
        return Err(mismatch("affine", format!("bias {:?} for {} rows", b.shape(), w.rows())));
    }
    let data = (0..w.rows())
        .map(|r| dot(w.row(r), x.data()) + b.data()[r])
        .collect();
    finite("affine", data, vec![w.rows()])
}

pub fn concat(parts: &[&Tensor]) -> Result<Tensor, TensorError> {
    if parts.is_empty() {
        return Err(mismatch("concat", "no inputs".into()));
    }
    if let Some(p) = parts.iter().find(|p| !p.is_vector()) {
        return Err(mismatch("concat", format!("non-vector input {:?}", p.shape())));
    }
    let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        data.extend_from_slice(p.data());
    }
    let n = data.len();
    Ok(Tensor::from_parts(vec![n], data))
}

pub fn tanh(a: &Tensor) -> Result<Tensor, TensorError> {
    finite("tanh", a.data().iter().map(|x| x.tanh()).collect(), a.shape().to_vec())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logistic(a: &Tensor) -> Result<Tensor, TensorError> {
    finite("logistic", a.data().iter().map(|&x| sigmoid(x)).collect(), a.shape().to_vec())
}

pub fn lookup_row(table: &Tensor, row: usize) -> Result<Tensor, TensorError> {
    if !table.is_matrix() {
        return Err(mismatch("lookup_row", format!("table shape {:?}", table.shape())));
    }
    if row >= table.rows() {
        return Err(TensorError::IndexOutOfRange { op: "lookup_row", index: row, size: table.rows() });
    }
    Ok(Tensor::from_parts(vec![table.cols()], table.row(row).to_vec()))
}

/// Softmax probabilities of a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(logits)[gold]` and the softmax itself.
pub fn softmax_xent(logits: &Tensor, gold: usize) -> Result<(Tensor, Vec<f64>), TensorError> {
    if !logits.is_vector() || logits.is_empty() {
        return Err(mismatch("softmax_xent", format!("logits shape {:?}", logits.shape())));
    }
    if gold >= logits.len() {
        return Err(TensorError::IndexOutOfRange { op: "softmax_xent", index: gold, size: logits.len() });
    }
    let z = logits.data();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let loss = lse - z[gold];
    let probs = z.iter().map(|v| (v - lse).exp()).collect();
    let t = finite("softmax_xent", vec![loss], Vec::new())?;
    Ok((t, probs))
}

pub fn gaussian_noise(a: &Tensor, sigma: f64, rng: &mut Rng) -> Result<Tensor, TensorError> {
    let data = a.data().iter().map(|x| x + sigma * rng.gaussian()).collect();
    finite("gaussian_noise", data, a.shape().to_vec())
}

pub fn sum(parts: &[&Tensor]) -> Result<Tensor, TensorError> {
    let first = parts.first().ok_or_else(|| mismatch("sum", "no inputs".into()))?;
    let mut data = first.data().to_vec();
    for p in &parts[1..] {
        same_shape("sum", first, p)?;
        data.iter_mut().zip(p.data()).for_each(|(a, b)| *a += b);
    }
    finite("sum", data, first.shape().to_vec())
}
