//! Central finite-difference check of tape gradients.

use super::{Eval, Graph, ParamStore, Rng, Tape, TensorError};

/// A deterministic scalar function of the parameters in a store.
pub trait Objective {
    type Error: From<TensorError>;

    fn loss<G: Graph>(&self, g: &mut G) -> Result<G::Var, Self::Error>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter name and flat index where `max_rel_error` occurred.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Which coordinates to perturb.
#[derive(Clone, Copy, Debug)]
pub enum Coords {
    All,
    /// At most this many per parameter, chosen with the given seed.
    Sample { per_param: usize, seed: u64 },
}

fn eval_loss<O: Objective>(obj: &O, store: &ParamStore) -> Result<f64, O::Error> {
    let mut g = Eval::new(store);
    let v = obj.loss(&mut g)?;
    let value = g.value(&v).item();
    if !value.is_finite() {
        return Err(TensorError::NonFinite { op: "gradient_check" }.into());
    }
    Ok(value)
}

/// Compares tape gradients of every trainable parameter against central
/// differences with step `h`.
///
/// The per-coordinate error is `|a - n| / max(1e-8, |a| + |n|)`; the maximum
/// over checked coordinates is returned.
pub fn gradient_check<O: Objective>(
    obj: &O,
    store: &mut ParamStore,
    h: f64,
    coords: Coords,
) -> Result<GradCheck, O::Error> {
    if h.is_nan() || h <= 0.0 {
        return Err(TensorError::InvalidArgument(format!("step h must be positive, got {h}")).into());
    }
    let grads = {
        let mut tape = Tape::new(store);
        let loss = obj.loss(&mut tape)?;
        tape.backward(loss)?
    };

    let mut rng = match coords {
        Coords::Sample { seed, .. } => Some(Rng::new(seed)),
        Coords::All => None,
    };
    let mut report = GradCheck { max_rel_error: 0.0, worst: None, checked: 0 };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        if !store.get(id).trainable {
            continue;
        }
        let len = store.tensor(id).len();
        let cols = store.tensor(id).cols();
        let indices: Vec<usize> = match (&coords, rng.as_mut()) {
            (Coords::Sample { per_param, .. }, Some(r)) if *per_param < len => {
                (0..*per_param).map(|_| r.below(len)).collect()
            }
            _ => (0..len).collect(),
        };
        for i in indices {
            let analytic = grads.get(id).map_or(0.0, |g| g.at(i, cols));
            let original = store.tensor(id).data()[i];
            store.get_mut(id).tensor.data_mut()[i] = original + h;
            let plus = eval_loss(obj, store);
            store.get_mut(id).tensor.data_mut()[i] = original - h;
            let minus = eval_loss(obj, store);
            store.get_mut(id).tensor.data_mut()[i] = original;
            let numeric = (plus? - minus?) / (2.0 * h);
            let err = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((store.get(id).name.clone(), i));
            }
        }
    }
    Ok(report)
}
