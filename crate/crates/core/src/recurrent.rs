//! LSTM and Elman cells, and the two bidirectional compositions built on them.
//!
//! `birnn_seq` encodes a whole sequence as the final forward state joined
//! with the final reverse state. `birnn_ctx` yields one vector per position
//! `i`: the forward state after reading `x_1..x_i` joined with the reverse
//! state after reading `x_n..x_i`, so both halves include position `i`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamId, ParamStore, Rng};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Lstm,
    SimpleRnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Weights of one gate (or of the whole Elman cell): `W_x x + W_h h + b`.
#[derive(Clone, Copy, Debug)]
pub struct GateParams {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Debug)]
pub struct CellParams {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// LSTM: input, forget, output, candidate. Elman: a single entry.
    pub gates: Vec<GateParams>,
}

const LSTM_GATES: [&str; 4] = ["i", "f", "o", "g"];

impl CellParams {
    /// Registers cell weights under `prefix`, Glorot-initialized with zero biases.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let names: &[&str] = match kind {
            CellKind::Lstm => &LSTM_GATES,
            CellKind::SimpleRnn => &["h"],
        };
        let mut gates = Vec::with_capacity(names.len());
        for gate in names {
            gates.push(GateParams {
                wx: store.add_glorot(format!("{prefix}.wx_{gate}"), hidden_dim, input_dim, rng)?,
                wh: store.add_glorot(format!("{prefix}.wh_{gate}"), hidden_dim, hidden_dim, rng)?,
                b: store.add_zeros(format!("{prefix}.b_{gate}"), &[hidden_dim])?,
            });
        }
        Ok(CellParams { kind, input_dim, hidden_dim, gates })
    }

    /// Rebinds to parameters already present in `store` (after loading a model).
    pub fn lookup(
        store: &ParamStore,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Option<Self> {
        let names: &[&str] = match kind {
            CellKind::Lstm => &LSTM_GATES,
            CellKind::SimpleRnn => &["h"],
        };
        let gates = names
            .iter()
            .map(|gate| {
                Some(GateParams {
                    wx: store.id(&format!("{prefix}.wx_{gate}"))?,
                    wh: store.id(&format!("{prefix}.wh_{gate}"))?,
                    b: store.id(&format!("{prefix}.b_{gate}"))?,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(CellParams { kind, input_dim, hidden_dim, gates })
    }
}

#[derive(Clone, Debug)]
pub struct RnnState<V> {
    pub h: V,
    /// Memory cell; `None` for the Elman cell.
    pub c: Option<V>,
}

pub fn zero_state<G: Graph>(g: &mut G, cell: &CellParams) -> RnnState<G::Var> {
    let h = g.zeros(cell.hidden_dim);
    let c = match cell.kind {
        CellKind::Lstm => Some(g.zeros(cell.hidden_dim)),
        CellKind::SimpleRnn => None,
    };
    RnnState { h, c }
}

fn gate_preactivation<G: Graph>(g: &mut G, gate: &GateParams, x: &G::Var, h: &G::Var) -> Result<G::Var> {
    let (wx, wh, b) = (g.param(gate.wx), g.param(gate.wh), g.param(gate.b));
    let xa = g.affine(&wx, x, &b)?;
    let ha = g.matvec(&wh, h)?;
    Ok(g.add(&xa, &ha)?)
}

/// One recurrence step.
pub fn cell_step<G: Graph>(
    g: &mut G,
    cell: &CellParams,
    x: &G::Var,
    state: &RnnState<G::Var>,
) -> Result<RnnState<G::Var>> {
    let got = g.value(x).len();
    if got != cell.input_dim {
        return Err(Error::Dimension { op: "cell_step", expected: cell.input_dim, got });
    }
    match cell.kind {
        CellKind::SimpleRnn => {
            let pre = gate_preactivation(g, &cell.gates[0], x, &state.h)?;
            Ok(RnnState { h: g.tanh(&pre)?, c: None })
        }
        CellKind::Lstm => {
            let c_prev = state.c.as_ref().expect("lstm state carries a memory cell");
            let pre_i = gate_preactivation(g, &cell.gates[0], x, &state.h)?;
            let pre_f = gate_preactivation(g, &cell.gates[1], x, &state.h)?;
            let pre_o = gate_preactivation(g, &cell.gates[2], x, &state.h)?;
            let pre_g = gate_preactivation(g, &cell.gates[3], x, &state.h)?;
            let i = g.logistic(&pre_i)?;
            let f = g.logistic(&pre_f)?;
            let o = g.logistic(&pre_o)?;
            let cand = g.tanh(&pre_g)?;
            let keep = g.mul(&f, c_prev)?;
            let write = g.mul(&i, &cand)?;
            let c = g.add(&keep, &write)?;
            let squashed = g.tanh(&c)?;
            let h = g.mul(&o, &squashed)?;
            Ok(RnnState { h, c: Some(c) })
        }
    }
}

/// Runs `cell` over `xs` from a zero state. States come back in consumption
/// order, so for `Reverse` the first state has read only the last input.
pub fn run<G: Graph>(
    g: &mut G,
    cell: &CellParams,
    xs: &[G::Var],
    direction: Direction,
) -> Result<Vec<RnnState<G::Var>>> {
    if xs.is_empty() {
        return Err(Error::EmptySequence("run"));
    }
    let mut state = zero_state(g, cell);
    let mut states = Vec::with_capacity(xs.len());
    let mut step = |g: &mut G, x: &G::Var| -> Result<()> {
        state = cell_step(g, cell, x, &state)?;
        states.push(state.clone());
        Ok(())
    };
    match direction {
        Direction::Forward => xs.iter().try_for_each(|x| step(g, x))?,
        Direction::Reverse => xs.iter().rev().try_for_each(|x| step(g, x))?,
    }
    Ok(states)
}

/// Sequence encoding: final forward hidden state joined with final reverse hidden state.
pub fn birnn_seq<G: Graph>(
    g: &mut G,
    forward: &CellParams,
    reverse: &CellParams,
    xs: &[G::Var],
) -> Result<G::Var> {
    if xs.is_empty() {
        return Err(Error::EmptySequence("birnn_seq"));
    }
    let f = run(g, forward, xs, Direction::Forward)?;
    let r = run(g, reverse, xs, Direction::Reverse)?;
    let last_f = f.last().expect("nonempty").h.clone();
    let last_r = r.last().expect("nonempty").h.clone();
    Ok(g.concat(&[last_f, last_r])?)
}

/// Per-position context encoding, one forward and one reverse pass.
pub fn birnn_ctx<G: Graph>(
    g: &mut G,
    forward: &CellParams,
    reverse: &CellParams,
    xs: &[G::Var],
) -> Result<Vec<G::Var>> {
    if xs.is_empty() {
        return Err(Error::EmptySequence("birnn_ctx"));
    }
    let n = xs.len();
    let f = run(g, forward, xs, Direction::Forward)?;
    let r = run(g, reverse, xs, Direction::Reverse)?;
    (0..n)
        .map(|i| Ok(g.concat(&[f[i].h.clone(), r[n - 1 - i].h.clone()])?))
        .collect()
}
