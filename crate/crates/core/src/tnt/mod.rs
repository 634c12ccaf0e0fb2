//! Second-order HMM baseline with suffix-based unknown-word handling, after
//! Brants' TnT.
//!
//! Transitions interpolate unigram, bigram and trigram relative frequencies
//! with weights set by deleted interpolation. Known words emit with their
//! relative frequency given the tag; unknown words use a suffix trie over the
//! rare training words.

mod suffix;
mod viterbi;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{self, ContainerError};
use crate::corpus::{Corpus, CorpusError};
use crate::error::{Error, Result};

pub use suffix::{is_capitalized, successive_abstraction_weight, SuffixModel, SuffixTrie};
pub use viterbi::{check_beam, viterbi, DenseTransitions, TransitionScorer};

pub const KIND: &str = "tnt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TntConfig {
    pub max_suffix_len: usize,
    /// Only words seen at most this often feed the suffix tries.
    pub suffix_max_freq: u64,
    /// Successive abstraction weight; the standard deviation of the tag
    /// probabilities when unset.
    pub theta: Option<f64>,
    /// Beam factor for decoding; 0 decodes exactly.
    pub beam: f64,
}

impl Default for TntConfig {
    fn default() -> Self {
        TntConfig { max_suffix_len: 10, suffix_max_freq: 10, theta: None, beam: 1000.0 }
    }
}

#[derive(Clone, Debug)]
pub struct TrigramModel {
    config: TntConfig,
    tagset: Vec<String>,
    tag_index: HashMap<String, usize>,
    unigram: Vec<u64>,
    bigram: Vec<u64>,
    trigram: Vec<u64>,
    lexicon: HashMap<String, Vec<u64>>,
    lambdas: [f64; 3],
    suffixes: SuffixModel,
    log_trans: Vec<f64>,
}

pub fn train_hmm(corpus: &Corpus, config: &TntConfig) -> Result<TrigramModel> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty.into());
    }
    let tagset = corpus.tagset();
    let t = tagset.len();
    let index: HashMap<&str, usize> = tagset.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let bound = t;
    let mut unigram = vec![0u64; t];
    let mut bigram = vec![0u64; (t + 1) * t];
    let mut trigram = vec![0u64; (t + 1) * (t + 1) * t];
    let mut lexicon: HashMap<String, Vec<u64>> = HashMap::new();
    for s in corpus.sentences() {
        let (mut h1, mut h2) = (bound, bound);
        for (form, tag) in s.forms.iter().zip(&s.tags) {
            let cur = index[tag.as_str()];
            unigram[cur] += 1;
            bigram[h2 * t + cur] += 1;
            trigram[(h1 * (t + 1) + h2) * t + cur] += 1;
            lexicon.entry(form.clone()).or_insert_with(|| vec![0; t])[cur] += 1;
            (h1, h2) = (h2, cur);
        }
    }
    TrigramModel::from_counts(config.clone(), tagset, unigram, bigram, trigram, lexicon)
}

/// `x / y`, or 0 when `y` is 0.
fn ratio(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        x / y
    }
}

impl TrigramModel {
    fn from_counts(
        config: TntConfig,
        tagset: Vec<String>,
        unigram: Vec<u64>,
        bigram: Vec<u64>,
        trigram: Vec<u64>,
        lexicon: HashMap<String, Vec<u64>>,
    ) -> Result<Self> {
        check_beam(config.beam)?;
        if config.theta.is_some_and(|th| !(th >= 0.0 && th.is_finite())) {
            return Err(Error::Config("theta must be a non-negative number".into()));
        }
        let t = tagset.len();
        if t == 0 {
            return Err(CorpusError::Empty.into());
        }
        let expected = [t, (t + 1) * t, (t + 1) * (t + 1) * t];
        for (table, want) in [unigram.len(), bigram.len(), trigram.len()].into_iter().zip(expected) {
            if table != want {
                return Err(ContainerError::Inconsistent(format!("count table of length {table}, expected {want}")).into());
            }
        }
        if let Some((w, _)) = lexicon.iter().find(|(_, c)| c.len() != t) {
            return Err(ContainerError::Inconsistent(format!("lexicon entry `{w}` has the wrong width")).into());
        }
        let tag_index = tagset.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let n: u64 = unigram.iter().sum();
        let theta = config
            .theta
            .unwrap_or_else(|| successive_abstraction_weight(&unigram.iter().map(|&c| c as f64 / n as f64).collect::<Vec<_>>()));
        let suffixes = SuffixModel::build(
            lexicon.iter().map(|(w, c)| (w.as_str(), c.as_slice())),
            t,
            config.max_suffix_len,
            config.suffix_max_freq,
            theta,
        );
        let mut model = TrigramModel {
            config,
            tagset,
            tag_index,
            unigram,
            bigram,
            trigram,
            lexicon,
            lambdas: [0.0; 3],
            suffixes,
            log_trans: Vec::new(),
        };
        model.lambdas = model.deleted_interpolation();
        model.log_trans = (0..=t)
            .flat_map(|t1| (0..=t).map(move |t2| (t1, t2)))
            .flat_map(|(t1, t2)| (0..t).map(move |t3| (t1, t2, t3)))
            .map(|(t1, t2, t3)| model.transition(t1, t2, t3).ln())
            .collect();
        Ok(model)
    }

    fn n_tokens(&self) -> f64 {
        self.unigram.iter().sum::<u64>() as f64
    }

    fn bigram_count(&self, t2: usize, t3: usize) -> u64 {
        self.bigram[t2 * self.tagset.len() + t3]
    }

    fn trigram_count(&self, t1: usize, t2: usize, t3: usize) -> u64 {
        let t = self.tagset.len();
        self.trigram[(t1 * (t + 1) + t2) * t + t3]
    }

    /// Number of times `t2` was followed by some tag.
    fn bigram_history(&self, t2: usize) -> u64 {
        let t = self.tagset.len();
        self.bigram[t2 * t..(t2 + 1) * t].iter().sum()
    }

    fn trigram_history(&self, t1: usize, t2: usize) -> u64 {
        let t = self.tagset.len();
        let start = (t1 * (t + 1) + t2) * t;
        self.trigram[start..start + t].iter().sum()
    }

    /// Each observed trigram votes, with its count, for the order whose
    /// estimate stays highest once that trigram is left out. Ties go to the
    /// lower order.
    fn deleted_interpolation(&self) -> [f64; 3] {
        let t = self.tagset.len();
        let n = self.n_tokens();
        let mut votes = [0.0f64; 3];
        for t1 in 0..=t {
            for t2 in 0..=t {
                for t3 in 0..t {
                    let f123 = self.trigram_count(t1, t2, t3);
                    if f123 == 0 {
                        continue;
                    }
                    let c3 = ratio(f123 as f64 - 1.0, self.trigram_history(t1, t2) as f64 - 1.0);
                    let c2 = ratio(self.bigram_count(t2, t3) as f64 - 1.0, self.bigram_history(t2) as f64 - 1.0);
                    let c1 = ratio(self.unigram[t3] as f64 - 1.0, n - 1.0);
                    let winner = if c1 >= c2 && c1 >= c3 {
                        0
                    } else if c2 >= c3 {
                        1
                    } else {
                        2
                    };
                    votes[winner] += f123 as f64;
                }
            }
        }
        let total: f64 = votes.iter().sum();
        votes.map(|v| v / total)
    }

    /// Smoothed `P(t3 | t1, t2)`; unseen histories back off to the next lower order.
    pub fn transition(&self, t1: usize, t2: usize, t3: usize) -> f64 {
        let p1 = self.unigram[t3] as f64 / self.n_tokens();
        let h2 = self.bigram_history(t2);
        let p2 = if h2 > 0 { self.bigram_count(t2, t3) as f64 / h2 as f64 } else { p1 };
        let h3 = self.trigram_history(t1, t2);
        let p3 = if h3 > 0 { self.trigram_count(t1, t2, t3) as f64 / h3 as f64 } else { p2 };
        let [l1, l2, l3] = self.lambdas;
        l1 * p1 + l2 * p2 + l3 * p3
    }

    pub fn lambdas(&self) -> [f64; 3] {
        self.lambdas
    }

    pub fn theta(&self) -> f64 {
        self.suffixes.theta
    }

    pub fn config(&self) -> &TntConfig {
        &self.config
    }

    pub fn tagset(&self) -> &[String] {
        &self.tagset
    }

    pub fn tag_id(&self, tag: &str) -> Option<usize> {
        self.tag_index.get(tag).copied()
    }

    /// Index used for the sentence boundary in transition histories.
    pub fn boundary(&self) -> usize {
        self.tagset.len()
    }

    pub fn suffixes(&self) -> &SuffixModel {
        &self.suffixes
    }

    pub fn is_known(&self, word: &str) -> bool {
        self.lexicon.contains_key(word)
    }

    /// Training count of `word` over all tags.
    pub fn word_freq(&self, word: &str) -> u64 {
        self.lexicon.get(word).map_or(0, |c| c.iter().sum())
    }

    /// `P(word | tag)` for a known word; for an unknown word, the suffix score
    /// `P(tag | suffix) / P(tag)`, which is proportional to it.
    pub fn emissions(&self, word: &str) -> Vec<f64> {
        match self.lexicon.get(word) {
            Some(counts) => counts.iter().zip(&self.unigram).map(|(&c, &f)| c as f64 / f as f64).collect(),
            None => self.suffixes.tag_ratios(word),
        }
    }

    pub fn emission(&self, word: &str, tag: usize) -> f64 {
        self.emissions(word)[tag]
    }

    pub fn tag_ids(&self, forms: &[String], beam: f64) -> Result<Vec<usize>> {
        let emissions: Vec<Vec<f64>> = forms.iter().map(|w| self.emissions(w).iter().map(|p| p.ln()).collect()).collect();
        viterbi(self, &emissions, beam)
    }

    /// Tags a sentence with the configured beam.
    pub fn tag(&self, forms: &[String]) -> Result<Vec<String>> {
        self.tag_with_beam(forms, self.config.beam)
    }

    pub fn tag_with_beam(&self, forms: &[String], beam: f64) -> Result<Vec<String>> {
        Ok(self.tag_ids(forms, beam)?.into_iter().map(|i| self.tagset[i].clone()).collect())
    }

    pub fn with_beam(mut self, beam: f64) -> Result<Self> {
        check_beam(beam)?;
        self.config.beam = beam;
        Ok(self)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut values = Vec::with_capacity(self.unigram.len() + self.bigram.len() + self.trigram.len());
        values.extend(self.unigram.iter().chain(&self.bigram).chain(&self.trigram).map(|&c| c as f64));
        let header = Header {
            kind: KIND.into(),
            config: self.config.clone(),
            tagset: self.tagset.clone(),
            lambdas: self.lambdas,
            theta: self.theta(),
            lexicon: self.lexicon.iter().map(|(w, c)| (w.clone(), c.clone())).collect(),
        };
        Ok(container::encode(&header, &values)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let found = container::peek_kind(bytes)?;
        if found != KIND {
            return Err(ContainerError::Kind { expected: KIND.into(), found }.into());
        }
        let (header, values): (Header, Vec<f64>) = container::decode(bytes)?;
        let t = header.tagset.len();
        let (n1, n2, n3) = (t, (t + 1) * t, (t + 1) * (t + 1) * t);
        if values.len() != n1 + n2 + n3 {
            return Err(ContainerError::Inconsistent(format!("{} count values for {t} tags", values.len())).into());
        }
        if values.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
            return Err(ContainerError::Inconsistent("counts must be non-negative integers".into()).into());
        }
        let counts: Vec<u64> = values.iter().map(|&v| v as u64).collect();
        TrigramModel::from_counts(
            header.config,
            header.tagset,
            counts[..n1].to_vec(),
            counts[n1..n1 + n2].to_vec(),
            counts[n1 + n2..].to_vec(),
            header.lexicon.into_iter().collect(),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_bytes(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&container::read_bytes(path)?)
    }
}

impl TransitionScorer for TrigramModel {
    fn n_tags(&self) -> usize {
        self.tagset.len()
    }

    fn log_transition(&self, t1: usize, t2: usize, t3: usize) -> f64 {
        let t = self.tagset.len();
        self.log_trans[(t1 * (t + 1) + t2) * t + t3]
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    config: TntConfig,
    tagset: Vec<String>,
    lambdas: [f64; 3],
    theta: f64,
    lexicon: BTreeMap<String, Vec<u64>>,
}
