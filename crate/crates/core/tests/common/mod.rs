#![allow(dead_code)]

use std::path::{Path, PathBuf};

use seqtag::autodiff::Rng;
use seqtag::corpus::{write_corpus, Corpus, Format};
use seqtag::repr::ReprMode;
use seqtag::tagger::Hyperparams;
use seqtag::tnt::{DenseTransitions, TransitionScorer};

pub fn toy_ud_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/toy-ud.conllu")
}

/// Exhaustive search over all tag sequences, keeping the first maximum in
/// order of (last tag, second to last, ...), with scores summed left to right.
pub fn brute_force<S: TransitionScorer>(scorer: &S, emissions: &[Vec<f64>]) -> Vec<usize> {
    let t = scorer.n_tags();
    let n = emissions.len();
    let b = t;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let total = t.pow(n as u32);
    // enumerate with the last position as the most significant digit
    for code in 0..total {
        let mut seq = vec![0; n];
        let mut c = code;
        for slot in seq.iter_mut() {
            *slot = c % t;
            c /= t;
        }
        let mut score = scorer.log_transition(b, b, seq[0]) + emissions[0][seq[0]];
        for i in 1..n {
            let t1 = if i >= 2 { seq[i - 2] } else { b };
            score = score + scorer.log_transition(t1, seq[i - 1], seq[i]) + emissions[i][seq[i]];
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, seq));
        }
    }
    best.unwrap().1
}

/// Random log transition table; with `coarse`, probabilities come from a
/// handful of dyadic values so ties and impossible transitions are common.
pub fn random_transitions(rng: &mut Rng, t: usize, coarse: bool) -> DenseTransitions {
    let mut table = Vec::with_capacity((t + 1) * (t + 1) * t);
    for _ in 0..(t + 1) * (t + 1) {
        let weights: Vec<f64> = (0..t)
            .map(|_| if coarse { [0.0, 1.0, 1.0, 2.0][rng.below(4)] } else { rng.uniform_range(0.01, 1.0) })
            .collect();
        let total: f64 = weights.iter().sum();
        for w in weights {
            // coarse scores are small integers, so sums are exact
            table.push(match (coarse, w == 0.0) {
                (true, true) => f64::NEG_INFINITY,
                (true, false) => -(3.0 - w),
                (false, _) => (w / total).ln(),
            });
        }
    }
    DenseTransitions::new(t, table).unwrap()
}

pub fn random_emissions(rng: &mut Rng, n: usize, t: usize, coarse: bool) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..t)
                .map(|_| if coarse { -(rng.below(3) as f64) } else { rng.uniform_range(0.001, 1.0).ln() })
                .collect()
        })
        .collect()
}

pub fn write_file(dir: &Path, name: &str, corpus: &Corpus, format: Format) -> PathBuf {
    let path = dir.join(name);
    let mut buf = Vec::new();
    write_corpus(corpus, format, &mut buf).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

/// Smaller network for the synthetic experiments.
pub fn small_hp(repr: ReprMode) -> Hyperparams {
    Hyperparams { word_dim: 32, subtoken_dim: 16, hidden_dim: 32, epochs: 10, repr, ..Hyperparams::default() }
}
