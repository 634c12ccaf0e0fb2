//! Evaluation, the frequency-bin, learning-curve and label-noise analyses,
//! and the command-line interface.

pub mod cli;
mod csv_out;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::Rng;
use crate::corpus::{corrupt_labels, subsample, Corpus, CorpusError};
use crate::error::{Error, Result};
use crate::tagger::{self, Hyperparams, TaggerModel};
use crate::tnt::{self, TntConfig, TrigramModel};

pub use csv_out::{curve_table, freq_bin_table, summarize, summary_table, CsvTable, SummaryRow};

/// Anything that tags sentences and knows how often it saw each word in training.
pub trait Tagger: Send + Sync {
    fn tag(&self, forms: &[String]) -> Result<Vec<String>>;
    fn tagset(&self) -> &[String];
    fn train_freq(&self, form: &str) -> u64;
}

impl Tagger for TaggerModel {
    fn tag(&self, forms: &[String]) -> Result<Vec<String>> {
        self.predict(forms)
    }

    fn tagset(&self) -> &[String] {
        TaggerModel::tagset(self)
    }

    fn train_freq(&self, form: &str) -> u64 {
        self.vocab().freq(form)
    }
}

impl Tagger for TrigramModel {
    fn tag(&self, forms: &[String]) -> Result<Vec<String>> {
        TrigramModel::tag(self, forms)
    }

    fn tagset(&self) -> &[String] {
        TrigramModel::tagset(self)
    }

    fn train_freq(&self, form: &str) -> u64 {
        self.word_freq(form)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub tokens: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Tokens whose form never occurred in training.
    pub oov_tokens: usize,
    pub oov_correct: usize,
    /// `None` when the test set has no unseen forms.
    pub oov_accuracy: Option<f64>,
    /// Gold tags outside the system's tagset, each counted as an error.
    pub unknown_gold: usize,
    /// `gold -> predicted -> count`.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

fn rate(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn evaluate(system: &dyn Tagger, test: &Corpus) -> Result<EvalReport> {
    let mut r = EvalReport::default();
    let tagset = system.tagset();
    let mut unknown = BTreeMap::<String, usize>::new();
    for s in test.sentences() {
        let pred = system.tag(&s.forms)?;
        for ((form, gold), p) in s.forms.iter().zip(&s.tags).zip(&pred) {
            let hit = gold == p;
            r.tokens += 1;
            r.correct += hit as usize;
            if system.train_freq(form) == 0 {
                r.oov_tokens += 1;
                r.oov_correct += hit as usize;
            }
            if !tagset.contains(gold) {
                *unknown.entry(gold.clone()).or_default() += 1;
            }
            *r.confusion.entry(gold.clone()).or_default().entry(p.clone()).or_default() += 1;
        }
    }
    r.unknown_gold = unknown.values().sum();
    if !unknown.is_empty() {
        log::warn!("gold tags missing from the model tagset: {:?}", unknown.keys().collect::<Vec<_>>());
    }
    r.accuracy = rate(r.correct, r.tokens).unwrap_or(0.0);
    r.oov_accuracy = rate(r.oov_correct, r.oov_tokens);
    Ok(r)
}

/// Log-frequency class of a test token: `int(ln(1 + freq))`, capped at `n_bins - 1`.
pub fn freq_bin(freq: u64, n_bins: usize) -> usize {
    (((1 + freq) as f64).ln() as usize).min(n_bins.saturating_sub(1))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreqBinRow {
    pub bin: usize,
    pub tokens: usize,
    /// Mean `ln(1 + freq)` of the tokens in the bin.
    pub mean_log_freq: Option<f64>,
    pub accuracy_a: Option<f64>,
    pub accuracy_b: Option<f64>,
    pub delta: Option<f64>,
}

/// Per-bin accuracy of `a` minus that of `b`, binned by the training
/// frequency `a` reports. Both systems should share a training split.
pub fn freq_bin_report(a: &dyn Tagger, b: &dyn Tagger, test: &Corpus, n_bins: usize) -> Result<Vec<FreqBinRow>> {
    if n_bins == 0 {
        return Err(Error::Config("at least one frequency bin is needed".into()));
    }
    let mut tokens = vec![0usize; n_bins];
    let mut log_sum = vec![0.0; n_bins];
    let mut hits = vec![[0usize; 2]; n_bins];
    for s in test.sentences() {
        let (pa, pb) = (a.tag(&s.forms)?, b.tag(&s.forms)?);
        for (i, (form, gold)) in s.forms.iter().zip(&s.tags).enumerate() {
            let f = a.train_freq(form);
            let bin = freq_bin(f, n_bins);
            tokens[bin] += 1;
            log_sum[bin] += ((1 + f) as f64).ln();
            hits[bin][0] += (pa[i] == *gold) as usize;
            hits[bin][1] += (pb[i] == *gold) as usize;
        }
    }
    Ok((0..n_bins)
        .map(|bin| {
            let n = tokens[bin];
            let (acc_a, acc_b) = (rate(hits[bin][0], n), rate(hits[bin][1], n));
            FreqBinRow {
                bin,
                tokens: n,
                mean_log_freq: (n > 0).then(|| log_sum[bin] / n as f64),
                accuracy_a: acc_a,
                accuracy_b: acc_b,
                delta: acc_a.zip(acc_b).map(|(x, y)| x - y),
            }
        })
        .collect())
}

/// A trainable system in an experiment grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SystemSpec {
    Bilstm { label: String, hyperparams: Hyperparams },
    Tnt { label: String, config: TntConfig },
}

impl SystemSpec {
    pub fn bilstm(hyperparams: Hyperparams) -> Self {
        SystemSpec::Bilstm { label: "bilstm".into(), hyperparams }
    }

    pub fn tnt(config: TntConfig) -> Self {
        SystemSpec::Tnt { label: "tnt".into(), config }
    }

    pub fn label(&self) -> &str {
        match self {
            SystemSpec::Bilstm { label, .. } | SystemSpec::Tnt { label, .. } => label,
        }
    }

    pub fn with_label(mut self, new: impl Into<String>) -> Self {
        match &mut self {
            SystemSpec::Bilstm { label, .. } | SystemSpec::Tnt { label, .. } => *label = new.into(),
        }
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        if let SystemSpec::Bilstm { hyperparams, .. } = &mut self {
            hyperparams.seed = seed;
        }
        self
    }

    pub fn train(&self, corpus: &Corpus) -> Result<Box<dyn Tagger>> {
        Ok(match self {
            SystemSpec::Bilstm { hyperparams, .. } => Box::new(tagger::train(corpus, hyperparams, None)?.0),
            SystemSpec::Tnt { config, .. } => Box::new(tnt::train_hmm(corpus, config)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Training sentences or corruption rate.
    pub x: f64,
    pub system: String,
    pub accuracy: f64,
    pub oov_accuracy: Option<f64>,
    pub seed: u64,
    pub seconds: f64,
}

fn run_grid(
    variants: &[Corpus],
    xs: &[f64],
    dev: &Corpus,
    systems: &[SystemSpec],
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let cells: Vec<(usize, usize)> = (0..variants.len()).flat_map(|i| (0..systems.len()).map(move |j| (i, j))).collect();
    cells
        .par_iter()
        .map(|&(i, j)| {
            let start = Instant::now();
            let model = systems[j].train(&variants[i])?;
            let report = evaluate(model.as_ref(), dev)?;
            log::info!("{} at {}: accuracy {:.4}", systems[j].label(), xs[i], report.accuracy);
            Ok(CurvePoint {
                x: xs[i],
                system: systems[j].label().to_string(),
                accuracy: report.accuracy,
                oov_accuracy: report.oov_accuracy,
                seed,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Trains every system on seeded subsamples of `train` and scores it on `dev`.
/// Rows come out size-major, in the order of `systems`.
pub fn learning_curve(
    train: &Corpus,
    dev: &Corpus,
    sizes: &[usize],
    systems: &[SystemSpec],
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("training sizes must be strictly ascending".into()));
    }
    let variants = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| subsample(train, n, &mut Rng::new(Rng::derive_seed(seed, i as u64))))
        .collect::<Result<Vec<_>, CorpusError>>()?;
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    run_grid(&variants, &xs, dev, systems, seed)
}

/// Retrains every system on `train` with a share `rate` of its labels corrupted.
pub fn noise_curve(
    train: &Corpus,
    dev: &Corpus,
    rates: &[f64],
    systems: &[SystemSpec],
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let variants = rates
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let (c, changed) = corrupt_labels(train, r, &mut Rng::new(Rng::derive_seed(seed, i as u64)))?;
            log::info!("rate {r}: {changed} labels corrupted");
            Ok(c)
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    run_grid(&variants, rates, dev, systems, seed)
}

/// Default learning-curve sizes that fit a corpus of `n` sentences, ending with `n`.
pub fn default_sizes(n: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = [100, 500, 1000, 2000, 5000].into_iter().filter(|&s| s < n).collect();
    sizes.push(n);
    sizes
}

pub const DEFAULT_RATES: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
