//! Hierarchical bi-LSTM tagger with an optional log-frequency auxiliary head.
//!
//! Each token vector (see [`crate::repr`]) is fed to a context bi-LSTM; the
//! vector at every position goes through a tag head and, when enabled, a
//! second head that predicts the token's binned training frequency. The
//! training loss is the sum of both cross-entropies.

mod persist;
mod train;

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Eval, Graph, ParamId, ParamStore, Rng};
use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::recurrent::{birnn_ctx, CellKind, CellParams};
use crate::repr::{apply_pretrained, read_pretrained, ReprDims, ReprLayer, ReprMode, Vocab, UNK_WORD};

pub use train::{train, EpochLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    Natural,
    Ten,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lr: f64,
    pub epochs: usize,
    /// Standard deviation of the Gaussian noise added to token vectors while training.
    pub sigma: f64,
    pub word_dim: usize,
    pub subtoken_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    pub repr: ReprMode,
    pub freqbin: bool,
    pub pretrained: Option<PathBuf>,
    pub cell: CellKind,
    /// Probability of swapping a once-seen training word for the unknown word.
    pub unk_replace_prob: f64,
    pub freq_log_base: LogBase,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lr: 0.1,
            epochs: 20,
            sigma: 0.2,
            word_dim: 128,
            subtoken_dim: 100,
            hidden_dim: 100,
            seed: 1,
            repr: ReprMode::WC,
            freqbin: false,
            pretrained: None,
            cell: CellKind::Lstm,
            unk_replace_prob: 0.25,
            freq_log_base: LogBase::Natural,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("invalid hyperparameter: {what}")));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be non-negative");
        }
        if self.word_dim == 0 || self.subtoken_dim == 0 || self.hidden_dim == 0 {
            return bad("dimensions must be positive");
        }
        if !(0.0..=1.0).contains(&self.unk_replace_prob) {
            return bad("unk_replace_prob must lie in [0, 1]");
        }
        Ok(())
    }

    fn repr_dims(&self) -> ReprDims {
        ReprDims { word_dim: self.word_dim, subtoken_dim: self.subtoken_dim, hidden_dim: self.hidden_dim, cell: self.cell }
    }
}

/// Frequency class of a word seen `freq` times in training: `int(log(freq))`,
/// truncated toward zero, with unseen words in class 0.
pub fn freqbin_label(freq: u64, base: LogBase) -> usize {
    if freq == 0 {
        return 0;
    }
    let l = match base {
        LogBase::Natural => (freq as f64).ln(),
        LogBase::Ten => (freq as f64).log10(),
    };
    l.trunc() as usize
}

/// Number of frequency classes: one more than the largest class of any training word.
pub fn num_freq_bins(vocab: &Vocab, base: LogBase) -> usize {
    1 + vocab.word_counts().map(|(_, f)| freqbin_label(f, base)).max().unwrap_or(0)
}

#[derive(Clone, Copy, Debug)]
struct Head {
    w: ParamId,
    b: ParamId,
}

impl Head {
    fn register(store: &mut ParamStore, name: &str, out: usize, inp: usize, rng: &mut Rng) -> Result<()> {
        store.add_glorot(format!("{name}.w"), out, inp, rng)?;
        store.add_zeros(format!("{name}.b"), &[out])?;
        Ok(())
    }

    fn lookup(store: &ParamStore, name: &str) -> Option<Head> {
        Some(Head { w: store.id(&format!("{name}.w"))?, b: store.id(&format!("{name}.b"))? })
    }

    fn apply<G: Graph>(&self, g: &mut G, x: &G::Var) -> Result<G::Var> {
        let (w, b) = (g.param(self.w), g.param(self.b));
        Ok(g.affine(&w, x, &b)?)
    }
}

/// Per-token scores from one forward pass.
#[derive(Clone, Debug)]
pub struct TokenOutput<V> {
    pub tag_logits: V,
    pub freq_logits: Option<V>,
}

/// A trained (or freshly initialized) tagger. Immutable once training ends.
#[derive(Clone, Debug)]
pub struct TaggerModel {
    hp: Hyperparams,
    vocab: Vocab,
    tagset: Vec<String>,
    tag_index: HashMap<String, usize>,
    n_bins: usize,
    store: ParamStore,
    repr: ReprLayer,
    ctx_forward: CellParams,
    ctx_reverse: CellParams,
    tag_head: Head,
    freq_head: Option<Head>,
}

impl TaggerModel {
    /// Builds the vocabulary and tagset from `train` and initializes all
    /// parameters from `rng`, loading pre-trained word vectors if configured.
    pub fn init(train: &Corpus, hp: &Hyperparams, rng: &mut Rng) -> Result<Self> {
        hp.validate()?;
        let vocab = Vocab::build(train)?;
        let tagset = train.tagset();
        let n_bins = num_freq_bins(&vocab, hp.freq_log_base);
        let mut hp = hp.clone();

        let pretrained = match (&hp.pretrained, hp.repr.uses_words()) {
            (Some(path), true) => Some(read_pretrained(path)?),
            (Some(_), false) => {
                log::warn!("representation {} has no word embeddings; ignoring pre-trained vectors", hp.repr);
                None
            }
            _ => None,
        };
        if let Some(p) = &pretrained {
            if !p.rows.is_empty() && p.dim != hp.word_dim {
                log::info!("word embedding size set to {} to match pre-trained vectors", p.dim);
                hp.word_dim = p.dim;
            }
        }

        let mut store = ParamStore::new();
        let repr = ReprLayer::register(&mut store, hp.repr, &vocab, hp.repr_dims(), rng)?;
        let d_in = repr.output_dim();
        CellParams::register(&mut store, "ctx.f", hp.cell, d_in, hp.hidden_dim, rng)?;
        CellParams::register(&mut store, "ctx.r", hp.cell, d_in, hp.hidden_dim, rng)?;
        Head::register(&mut store, "tag", tagset.len(), 2 * hp.hidden_dim, rng)?;
        if hp.freqbin {
            Head::register(&mut store, "freq", n_bins, 2 * hp.hidden_dim, rng)?;
        }
        if let (Some(p), Some(table)) = (&pretrained, repr.word) {
            let stats = apply_pretrained(p, &vocab, &table, &mut store)?;
            log::info!(
                "pre-trained vectors: {} loaded, {} not in vocabulary, {} duplicates",
                stats.loaded,
                stats.missed,
                stats.duplicates
            );
        }
        Self::assemble(hp, vocab, tagset, n_bins, store)
    }

    /// Binds a parameter store to the network structure described by `hp`.
    fn assemble(hp: Hyperparams, vocab: Vocab, tagset: Vec<String>, n_bins: usize, store: ParamStore) -> Result<Self> {
        let missing = |what: &str| Error::Config(format!("model is missing `{what}`"));
        let repr = ReprLayer::lookup(&store, hp.repr, hp.repr_dims())?;
        let d_in = repr.output_dim();
        let ctx_forward = CellParams::lookup(&store, "ctx.f", hp.cell, d_in, hp.hidden_dim).ok_or_else(|| missing("ctx.f"))?;
        let ctx_reverse = CellParams::lookup(&store, "ctx.r", hp.cell, d_in, hp.hidden_dim).ok_or_else(|| missing("ctx.r"))?;
        let tag_head = Head::lookup(&store, "tag").ok_or_else(|| missing("tag head"))?;
        let freq_head = if hp.freqbin {
            Some(Head::lookup(&store, "freq").ok_or_else(|| missing("freq head"))?)
        } else {
            None
        };
        let tag_index = tagset.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(TaggerModel { hp, vocab, tagset, tag_index, n_bins, store, repr, ctx_forward, ctx_reverse, tag_head, freq_head })
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn tagset(&self) -> &[String] {
        &self.tagset
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn repr(&self) -> &ReprLayer {
        &self.repr
    }

    pub fn tag_id(&self, tag: &str) -> Option<usize> {
        self.tag_index.get(tag).copied()
    }

    /// Frequency class used as the auxiliary target for `form`.
    pub fn freq_label(&self, form: &str) -> usize {
        freqbin_label(self.vocab.freq(form), self.hp.freq_log_base).min(self.n_bins - 1)
    }

    /// Runs the network over one sentence. With `training` set, once-seen
    /// words may be swapped for the unknown word and Gaussian noise is added
    /// to each token vector, both drawn from the given stream.
    pub fn forward_sentence<G: Graph>(
        &self,
        g: &mut G,
        forms: &[String],
        mut training: Option<&mut Rng>,
    ) -> Result<Vec<TokenOutput<G::Var>>> {
        if forms.is_empty() {
            return Err(Error::EmptySequence("forward_sentence"));
        }
        let mut xs = Vec::with_capacity(forms.len());
        for form in forms {
            let mut word_id = None;
            if let Some(rng) = training.as_deref_mut() {
                if self.repr.word.is_some()
                    && self.hp.unk_replace_prob > 0.0
                    && self.vocab.freq(form) == 1
                    && rng.bernoulli(self.hp.unk_replace_prob)
                {
                    word_id = Some(UNK_WORD);
                }
            }
            let mut x = self.repr.token_repr(g, &self.vocab, form, word_id)?;
            if let Some(rng) = training.as_deref_mut() {
                if self.hp.sigma > 0.0 {
                    x = g.gaussian_noise(&x, self.hp.sigma, rng)?;
                }
            }
            xs.push(x);
        }
        let vs = birnn_ctx(g, &self.ctx_forward, &self.ctx_reverse, &xs)?;
        vs.iter()
            .map(|v| {
                Ok(TokenOutput {
                    tag_logits: self.tag_head.apply(g, v)?,
                    freq_logits: match &self.freq_head {
                        Some(h) => Some(h.apply(g, v)?),
                        None => None,
                    },
                })
            })
            .collect()
    }

    /// Summed tag cross-entropy and, with the auxiliary head, summed
    /// frequency-class cross-entropy.
    pub fn sentence_loss_parts<G: Graph>(
        &self,
        g: &mut G,
        sentence: &Sentence,
        training: Option<&mut Rng>,
    ) -> Result<(G::Var, Option<G::Var>)> {
        let gold = sentence
            .tags
            .iter()
            .map(|t| self.tag_id(t).ok_or_else(|| Error::UnknownTag(t.clone())))
            .collect::<Result<Vec<_>>>()?;
        let outputs = self.forward_sentence(g, &sentence.forms, training)?;
        let mut tag_terms = Vec::with_capacity(outputs.len());
        let mut freq_terms = Vec::new();
        for ((out, &tag), form) in outputs.iter().zip(&gold).zip(&sentence.forms) {
            tag_terms.push(g.softmax_xent(&out.tag_logits, tag)?);
            if let Some(fl) = &out.freq_logits {
                freq_terms.push(g.softmax_xent(fl, self.freq_label(form))?);
            }
        }
        let tag_loss = g.sum(&tag_terms)?;
        let freq_loss = if freq_terms.is_empty() { None } else { Some(g.sum(&freq_terms)?) };
        Ok((tag_loss, freq_loss))
    }

    /// Training objective for one sentence.
    pub fn sentence_loss<G: Graph>(&self, g: &mut G, sentence: &Sentence, training: Option<&mut Rng>) -> Result<G::Var> {
        match self.sentence_loss_parts(g, sentence, training)? {
            (tag, None) => Ok(tag),
            (tag, Some(freq)) => Ok(g.add(&tag, &freq)?),
        }
    }

    /// Tag scores per token, noise-free.
    pub fn tag_scores(&self, forms: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut g = Eval::new(&self.store);
        let outputs = self.forward_sentence(&mut g, forms, None)?;
        Ok(outputs.iter().map(|o| g.value(&o.tag_logits).data().to_vec()).collect())
    }

    /// Highest-scoring tag per token; ties go to the earlier tag in the tagset.
    pub fn predict(&self, forms: &[String]) -> Result<Vec<String>> {
        Ok(self
            .tag_scores(forms)?
            .iter()
            .map(|scores| self.tagset[argmax(scores)].clone())
            .collect())
    }
}

/// Index of the first maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
