//! Tagged corpora: CoNLL-U and two-column readers and writers, statistics,
//! label corruption and subsampling.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Rng;

/// Universal POS tags, including both the v1 `CONJ` and the v2 `CCONJ`.
pub const UPOS_TAGS: [&str; 18] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "CONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{file}:{line}: expected {expected} columns, found {found}")]
    Columns { file: String, line: usize, expected: usize, found: usize },
    #[error("{file}:{line}: empty FORM")]
    EmptyForm { file: String, line: usize },
    #[error("corpus is empty")]
    Empty,
    #[error("corruption rate {0} is outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("cannot corrupt labels of a corpus with {0} distinct tag(s)")]
    TooFewTags(usize),
    #[error("cannot sample {requested} sentences from a corpus of {available}")]
    SizeOutOfRange { requested: usize, available: usize },
    #[error("unknown corpus format `{0}` (expected conllu or twocol)")]
    UnknownFormat(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    /// Guesses the split from a file name (`en-ud-dev.conllu` is `Dev`).
    /// Anything unrecognized is treated as training data.
    pub fn from_path(path: &Path) -> Split {
        let name = path.file_name().map(|n| n.to_string_lossy().to_lowercase()).unwrap_or_default();
        if name.contains("test") {
            Split::Test
        } else if name.contains("dev") {
            Split::Dev
        } else {
            Split::Train
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Conllu,
    Twocol,
}

impl FromStr for Format {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conllu" => Ok(Format::Conllu),
            "twocol" => Ok(Format::Twocol),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// Where a sentence came from: file name and the 1-based line span.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Source {
    pub file: String,
    pub first_line: usize,
    pub last_line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sentence {
    pub forms: Vec<String>,
    pub tags: Vec<String>,
    pub source: Source,
}

impl Sentence {
    /// Panics unless `forms` and `tags` have the same nonzero length and no form is empty.
    pub fn new(forms: Vec<String>, tags: Vec<String>) -> Self {
        assert!(!forms.is_empty() && forms.len() == tags.len(), "forms and tags must align");
        assert!(forms.iter().all(|f| !f.is_empty()), "empty form");
        Sentence { forms, tags, source: Source::default() }
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    split: Split,
    language: String,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>, split: Split, language: impl Into<String>) -> Self {
        Corpus { sentences, split, language: language.into() }
    }

    /// Builds a corpus from `(form, tag)` sentences; handy for tests and toy data.
    pub fn from_pairs<S: AsRef<str>>(split: Split, sentences: &[Vec<(S, S)>]) -> Self {
        let sentences = sentences
            .iter()
            .map(|s| {
                let (forms, tags) = s.iter().map(|(f, t)| (f.as_ref().to_string(), t.as_ref().to_string())).unzip();
                Sentence::new(forms, tags)
            })
            .collect();
        Corpus::new(sentences, split, "")
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Sorted distinct tags.
    pub fn tagset(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.sentences.iter().flat_map(|s| s.tags.iter().map(String::as_str)).collect();
        set.into_iter().map(str::to_string).collect()
    }

    fn with_sentences(&self, sentences: Vec<Sentence>) -> Corpus {
        Corpus { sentences, split: self.split, language: self.language.clone() }
    }
}

fn language_from_path(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .and_then(|n| n.split(['-', '_', '.']).next().map(str::to_string))
        .unwrap_or_default()
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

pub fn read_conllu(path: &Path, split: Split) -> Result<Corpus, CorpusError> {
    let name = path.display().to_string();
    let sentences = parse_conllu(open(path)?, &name).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io { path: path.to_path_buf(), source },
        other => other,
    })?;
    Ok(Corpus::new(sentences, split, language_from_path(path)))
}

pub fn read_twocol(path: &Path, split: Split) -> Result<Corpus, CorpusError> {
    let name = path.display().to_string();
    let sentences = parse_twocol(open(path)?, &name)?;
    Ok(Corpus::new(sentences, split, language_from_path(path)))
}

pub fn read_corpus(path: &Path, format: Format, split: Split) -> Result<Corpus, CorpusError> {
    match format {
        Format::Conllu => read_conllu(path, split),
        Format::Twocol => read_twocol(path, split),
    }
}

struct Pending {
    forms: Vec<String>,
    tags: Vec<String>,
    first_line: usize,
}

impl Pending {
    fn new() -> Self {
        Pending { forms: Vec::new(), tags: Vec::new(), first_line: 0 }
    }

    fn flush(&mut self, file: &str, last_line: usize, out: &mut Vec<Sentence>) {
        if !self.forms.is_empty() {
            out.push(Sentence {
                forms: std::mem::take(&mut self.forms),
                tags: std::mem::take(&mut self.tags),
                source: Source { file: file.to_string(), first_line: self.first_line, last_line },
            });
        }
        self.first_line = 0;
    }

    fn push(&mut self, line: usize, form: &str, tag: &str) {
        if self.forms.is_empty() {
            self.first_line = line;
        }
        self.forms.push(form.to_string());
        self.tags.push(tag.to_string());
    }
}

/// Parses CoNLL-U text. FORM is column 2, UPOS column 4; comments,
/// multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped.
pub fn parse_conllu<R: BufRead>(reader: R, file: &str) -> Result<Vec<Sentence>, CorpusError> {
    let mut out = Vec::new();
    let mut pending = Pending::new();
    let mut last = 0;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| CorpusError::Io { path: PathBuf::from(file), source })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            pending.flush(file, lineno - 1, &mut out);
            continue;
        }
        last = lineno;
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(CorpusError::Columns { file: file.to_string(), line: lineno, expected: 10, found: cols.len() });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        if cols[1].is_empty() {
            return Err(CorpusError::EmptyForm { file: file.to_string(), line: lineno });
        }
        pending.push(lineno, cols[1], cols[3]);
    }
    pending.flush(file, last, &mut out);
    Ok(out)
}

/// Parses `form<whitespace>tag` lines with blank lines between sentences.
pub fn parse_twocol<R: BufRead>(reader: R, file: &str) -> Result<Vec<Sentence>, CorpusError> {
    let mut out = Vec::new();
    let mut pending = Pending::new();
    let mut last = 0;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| CorpusError::Io { path: PathBuf::from(file), source })?;
        if line.trim().is_empty() {
            pending.flush(file, lineno - 1, &mut out);
            continue;
        }
        last = lineno;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(CorpusError::Columns { file: file.to_string(), line: lineno, expected: 2, found: cols.len() });
        }
        pending.push(lineno, cols[0], cols[1]);
    }
    pending.flush(file, last, &mut out);
    Ok(out)
}

/// Writes ID, FORM and UPOS; every other column is `_`.
pub fn write_conllu<W: Write>(corpus: &Corpus, mut w: W) -> io::Result<()> {
    for s in corpus.sentences() {
        for (i, (form, tag)) in s.forms.iter().zip(&s.tags).enumerate() {
            writeln!(w, "{}\t{}\t_\t{}\t_\t_\t_\t_\t_\t_", i + 1, form, tag)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_twocol<W: Write>(corpus: &Corpus, mut w: W) -> io::Result<()> {
    for s in corpus.sentences() {
        for (form, tag) in s.forms.iter().zip(&s.tags) {
            writeln!(w, "{form}\t{tag}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_corpus<W: Write>(corpus: &Corpus, format: Format, w: W) -> io::Result<()> {
    match format {
        Format::Conllu => write_conllu(corpus, w),
        Format::Twocol => write_twocol(corpus, w),
    }
}

/// Replaces each tag, independently with probability `rate`, by a different
/// tag drawn uniformly from the corpus tagset. Returns the corrupted corpus
/// and the number of tags changed.
pub fn corrupt_labels(corpus: &Corpus, rate: f64, rng: &mut Rng) -> Result<(Corpus, usize), CorpusError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(CorpusError::RateOutOfRange(rate));
    }
    if rate == 0.0 {
        return Ok((corpus.clone(), 0));
    }
    let tagset = corpus.tagset();
    if tagset.len() < 2 {
        return Err(CorpusError::TooFewTags(tagset.len()));
    }
    let index: HashMap<&str, usize> = tagset.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut changed = 0;
    let sentences = corpus
        .sentences()
        .iter()
        .map(|s| {
            let tags = s
                .tags
                .iter()
                .map(|tag| {
                    if !rng.bernoulli(rate) {
                        return tag.clone();
                    }
                    changed += 1;
                    let original = index[tag.as_str()];
                    // uniform over the other tags
                    let mut pick = rng.below(tagset.len() - 1);
                    if pick >= original {
                        pick += 1;
                    }
                    tagset[pick].clone()
                })
                .collect();
            Sentence { forms: s.forms.clone(), tags, source: s.source.clone() }
        })
        .collect();
    Ok((corpus.with_sentences(sentences), changed))
}

/// `n` sentences drawn uniformly without replacement, in their original order.
pub fn subsample(corpus: &Corpus, n: usize, rng: &mut Rng) -> Result<Corpus, CorpusError> {
    if n == 0 || n > corpus.len() {
        return Err(CorpusError::SizeOutOfRange { requested: n, available: corpus.len() });
    }
    let mut idx: Vec<usize> = (0..corpus.len()).collect();
    // partial Fisher-Yates: the first n slots become the sample
    for i in 0..n {
        let j = i + rng.below(corpus.len() - i);
        idx.swap(i, j);
    }
    let mut chosen = idx[..n].to_vec();
    chosen.sort_unstable();
    Ok(corpus.with_sentences(chosen.into_iter().map(|i| corpus.sentences[i].clone()).collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub sentences: usize,
    pub tokens: usize,
    pub types: usize,
    pub tagset: Vec<String>,
    /// Tags outside the Universal POS inventory.
    pub non_upos_tags: Vec<String>,
    /// Mean over word types of ln(count).
    pub mean_log_freq: f64,
    pub max_log_freq: f64,
}

pub fn stats(corpus: &Corpus) -> Result<CorpusStats, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in corpus.sentences() {
        for f in &s.forms {
            *counts.entry(f).or_default() += 1;
        }
    }
    let tagset = corpus.tagset();
    let non_upos_tags: Vec<String> = tagset.iter().filter(|t| !UPOS_TAGS.contains(&t.as_str())).cloned().collect();
    if !non_upos_tags.is_empty() {
        log::warn!("tags outside the Universal POS inventory: {}", non_upos_tags.join(", "));
    }
    let mut logs: Vec<f64> = counts.values().map(|&c| (c as f64).ln()).collect();
    logs.sort_by(f64::total_cmp);
    Ok(CorpusStats {
        sentences: corpus.len(),
        tokens: corpus.num_tokens(),
        types: counts.len(),
        tagset,
        non_upos_tags,
        mean_log_freq: logs.iter().sum::<f64>() / logs.len() as f64,
        max_log_freq: logs.last().copied().unwrap_or(0.0),
    })
}
