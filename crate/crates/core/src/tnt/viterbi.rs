//! Second-order Viterbi decoding in log space.

use crate::error::{Error, Result};

/// Log transition scores of a trigram tagger. Histories use the index
/// `n_tags()` for the sentence boundary.
pub trait TransitionScorer {
    fn n_tags(&self) -> usize;
    /// `ln P(t3 | t1, t2)`, possibly `-inf`.
    fn log_transition(&self, t1: usize, t2: usize, t3: usize) -> f64;
}

/// A dense table of log transitions, indexed `[t1][t2][t3]` with
/// `t1, t2 ∈ 0..=n` and `t3 ∈ 0..n`.
#[derive(Clone, Debug)]
pub struct DenseTransitions {
    n: usize,
    table: Vec<f64>,
}

impl DenseTransitions {
    pub fn new(n: usize, table: Vec<f64>) -> Result<Self> {
        let expected = (n + 1) * (n + 1) * n;
        if table.len() != expected {
            return Err(Error::Dimension { op: "DenseTransitions", expected, got: table.len() });
        }
        Ok(DenseTransitions { n, table })
    }
}

impl TransitionScorer for DenseTransitions {
    fn n_tags(&self) -> usize {
        self.n
    }

    fn log_transition(&self, t1: usize, t2: usize, t3: usize) -> f64 {
        self.table[(t1 * (self.n + 1) + t2) * self.n + t3]
    }
}

/// Checks a beam factor: 0 (exact) or at least 1.
pub fn check_beam(beam: f64) -> Result<()> {
    if beam == 0.0 || beam >= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("beam factor must be 0 or at least 1, got {beam}")))
    }
}

/// Most probable tag sequence given per-token log emissions.
///
/// A path scores `Σ_i ln P(t_i | t_{i-2}, t_{i-1}) + ln P(w_i | t_i)`. With
/// `beam > 0`, states scoring below `best - ln(beam)` at a position are
/// dropped. Among equally scored paths the one that is smallest when compared
/// from the last tag backwards wins.
pub fn viterbi<S: TransitionScorer + ?Sized>(scorer: &S, log_emissions: &[Vec<f64>], beam: f64) -> Result<Vec<usize>> {
    check_beam(beam)?;
    let n = log_emissions.len();
    if n == 0 {
        return Err(Error::EmptySequence("viterbi"));
    }
    let t = scorer.n_tags();
    if let Some(row) = log_emissions.iter().find(|r| r.len() != t) {
        return Err(Error::Dimension { op: "viterbi", expected: t, got: row.len() });
    }
    let bound = t;
    let states = (t + 1) * t;
    let idx = |prev: usize, cur: usize| prev * t + cur;

    let mut delta = vec![f64::NEG_INFINITY; states];
    let mut active = vec![false; states];
    for cur in 0..t {
        delta[idx(bound, cur)] = scorer.log_transition(bound, bound, cur) + log_emissions[0][cur];
        active[idx(bound, cur)] = true;
    }
    prune(&mut active, &delta, beam);

    // back[i][idx(c, cur)] = tag at position i - 2
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(n);
    back.push(Vec::new());
    let mut next_delta = vec![f64::NEG_INFINITY; states];
    let mut next_active = vec![false; states];
    for emit in &log_emissions[1..] {
        let mut bp = vec![usize::MAX; states];
        next_active.iter_mut().for_each(|a| *a = false);
        for c in 0..t {
            let preds: Vec<usize> = (0..=t).filter(|&p| active[idx(p, c)]).collect();
            if preds.is_empty() {
                continue;
            }
            for cur in 0..t {
                let mut best = f64::NEG_INFINITY;
                let mut arg = usize::MAX;
                for &p in &preds {
                    let cand = delta[idx(p, c)] + scorer.log_transition(p, c, cur);
                    if arg == usize::MAX || cand > best {
                        best = cand;
                        arg = p;
                    }
                }
                next_delta[idx(c, cur)] = best + emit[cur];
                next_active[idx(c, cur)] = true;
                bp[idx(c, cur)] = arg;
            }
        }
        std::mem::swap(&mut delta, &mut next_delta);
        std::mem::swap(&mut active, &mut next_active);
        prune(&mut active, &delta, beam);
        back.push(bp);
    }

    let mut last = None;
    for cur in 0..t {
        for prev in 0..=t {
            let s = idx(prev, cur);
            if active[s] && last.is_none_or(|(_, _, best)| delta[s] > best) {
                last = Some((prev, cur, delta[s]));
            }
        }
    }
    let (prev, cur, _) = last.expect("at least one state survives pruning");
    let mut tags = vec![0; n];
    tags[n - 1] = cur;
    if n >= 2 {
        tags[n - 2] = prev;
    }
    for i in (2..n).rev() {
        tags[i - 2] = back[i][idx(tags[i - 1], tags[i])];
    }
    Ok(tags)
}

fn prune(active: &mut [bool], delta: &[f64], beam: f64) {
    if beam == 0.0 {
        return;
    }
    let best = active
        .iter()
        .zip(delta)
        .filter(|(a, _)| **a)
        .map(|(_, d)| *d)
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = best - beam.ln();
    for (a, d) in active.iter_mut().zip(delta) {
        if *a && *d < threshold {
            *a = false;
        }
    }
}
