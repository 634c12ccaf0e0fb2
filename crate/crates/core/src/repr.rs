//! Vocabularies, embedding tables and token representations.
//!
//! A token is represented by any combination of a word embedding and
//! subtoken encodings (characters or UTF-8 bytes), each subtoken encoding
//! being a sequence bi-LSTM over the symbol embeddings framed by start and
//! end markers. Parts are always concatenated word, then char, then byte.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamId, ParamStore, Rng, Tensor};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::recurrent::{birnn_seq, CellKind, CellParams};

pub const UNK_WORD: usize = 0;
pub const UNK_CHAR: usize = 0;
pub const CHAR_START: usize = 1;
pub const CHAR_END: usize = 2;
pub const BYTE_START: usize = 256;
pub const BYTE_END: usize = 257;
pub const BYTE_SYMBOLS: usize = 258;

const UNK_WORD_NAME: &str = "<unk>";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
struct VocabData {
    words: Vec<String>,
    freqs: Vec<u64>,
    chars: Vec<char>,
}

/// Word and character inventories of a training corpus, with training counts.
///
/// Word id 0 is the unknown word; char ids 0, 1, 2 are the unknown
/// character and the word start and end markers. Lookups never extend the
/// inventories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabData", into = "VocabData")]
pub struct Vocab {
    data: VocabData,
    word_ids: HashMap<String, usize>,
    char_ids: HashMap<char, usize>,
}

impl From<VocabData> for Vocab {
    fn from(data: VocabData) -> Self {
        let word_ids = data.words.iter().enumerate().skip(1).map(|(i, w)| (w.clone(), i)).collect();
        let char_ids = data.chars.iter().enumerate().skip(3).map(|(i, &c)| (c, i)).collect();
        Vocab { data, word_ids, char_ids }
    }
}

impl From<Vocab> for VocabData {
    fn from(v: Vocab) -> Self {
        v.data
    }
}

impl Vocab {
    /// Inventories in first-occurrence order, counted over the training split only.
    pub fn build(train: &Corpus) -> Result<Vocab> {
        if train.num_tokens() == 0 {
            return Err(crate::corpus::CorpusError::Empty.into());
        }
        let mut words = vec![UNK_WORD_NAME.to_string()];
        let mut freqs = vec![0u64];
        // placeholders for the three special char ids
        let mut chars = vec!['\u{0}', '\u{2}', '\u{3}'];
        let mut word_ids: HashMap<String, usize> = HashMap::new();
        let mut char_ids: HashMap<char, usize> = HashMap::new();
        for s in train.sentences() {
            for form in &s.forms {
                let id = *word_ids.entry(form.clone()).or_insert_with(|| {
                    words.push(form.clone());
                    freqs.push(0);
                    words.len() - 1
                });
                freqs[id] += 1;
                for c in form.chars() {
                    char_ids.entry(c).or_insert_with(|| {
                        chars.push(c);
                        chars.len() - 1
                    });
                }
            }
        }
        Ok(Vocab { data: VocabData { words, freqs, chars }, word_ids, char_ids })
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.word_ids.get(form).copied().unwrap_or(UNK_WORD)
    }

    pub fn char_id(&self, c: char) -> usize {
        self.char_ids.get(&c).copied().unwrap_or(UNK_CHAR)
    }

    /// Training count of `form`; 0 for out-of-vocabulary forms.
    pub fn freq(&self, form: &str) -> u64 {
        self.word_ids.get(form).map_or(0, |&i| self.data.freqs[i])
    }

    pub fn freq_of_id(&self, id: usize) -> u64 {
        self.data.freqs[id]
    }

    pub fn is_oov(&self, form: &str) -> bool {
        self.freq(form) == 0
    }

    pub fn word(&self, id: usize) -> &str {
        &self.data.words[id]
    }

    /// Vocabulary words (without the unknown-word entry) and their counts.
    pub fn word_counts(&self) -> impl Iterator<Item = (&str, u64)> {
        self.data.words.iter().zip(&self.data.freqs).skip(1).map(|(w, &f)| (w.as_str(), f))
    }

    /// Number of word ids, including the unknown word.
    pub fn num_words(&self) -> usize {
        self.data.words.len()
    }

    /// Number of char ids, including the three specials.
    pub fn num_chars(&self) -> usize {
        self.data.chars.len()
    }

    pub fn max_freq(&self) -> u64 {
        self.data.freqs.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReprMode {
    #[serde(rename = "w")]
    W,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "c+b")]
    CB,
    #[serde(rename = "w+c")]
    WC,
}

impl ReprMode {
    pub fn uses_words(self) -> bool {
        matches!(self, ReprMode::W | ReprMode::WC)
    }

    pub fn uses_chars(self) -> bool {
        matches!(self, ReprMode::C | ReprMode::CB | ReprMode::WC)
    }

    pub fn uses_bytes(self) -> bool {
        matches!(self, ReprMode::B | ReprMode::CB)
    }

    /// Width of the token vector for the given word and subtoken-LSTM sizes.
    pub fn output_dim(self, word_dim: usize, subtoken_hidden: usize) -> usize {
        let mut d = 0;
        if self.uses_words() {
            d += word_dim;
        }
        if self.uses_chars() {
            d += 2 * subtoken_hidden;
        }
        if self.uses_bytes() {
            d += 2 * subtoken_hidden;
        }
        d
    }
}

impl FromStr for ReprMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w" => Ok(ReprMode::W),
            "c" => Ok(ReprMode::C),
            "b" => Ok(ReprMode::B),
            "cb" | "c+b" => Ok(ReprMode::CB),
            "wc" | "w+c" => Ok(ReprMode::WC),
            other => Err(Error::Config(format!("unknown representation `{other}` (w, c, b, cb, wc)"))),
        }
    }
}

impl fmt::Display for ReprMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReprMode::W => "w",
            ReprMode::C => "c",
            ReprMode::B => "b",
            ReprMode::CB => "c+b",
            ReprMode::WC => "w+c",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubtokenLevel {
    Char,
    Byte,
}

#[derive(Clone, Copy, Debug)]
pub struct EmbeddingTable {
    pub param: ParamId,
    pub rows: usize,
    pub dim: usize,
}

impl EmbeddingTable {
    /// Rows drawn uniformly from ±sqrt(3 / dim).
    pub fn register(store: &mut ParamStore, name: &str, rows: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        let bound = (3.0 / dim as f64).sqrt();
        let data = (0..rows * dim).map(|_| rng.uniform_range(-bound, bound)).collect();
        let param = store.add(name, Tensor::matrix(rows, dim, data)?)?;
        Ok(EmbeddingTable { param, rows, dim })
    }

    fn lookup(store: &ParamStore, name: &str) -> Result<Self> {
        let param = store
            .id(name)
            .ok_or_else(|| Error::Config(format!("model is missing parameter `{name}`")))?;
        let t = store.tensor(param);
        Ok(EmbeddingTable { param, rows: t.rows(), dim: t.cols() })
    }
}

#[derive(Clone, Debug)]
pub struct SubtokenEncoder {
    pub level: SubtokenLevel,
    pub table: EmbeddingTable,
    pub forward: CellParams,
    pub reverse: CellParams,
}

/// Symbol ids fed to the subtoken bi-LSTM: start marker, one id per code
/// point (or UTF-8 byte), end marker.
pub fn subtoken_symbols(level: SubtokenLevel, vocab: &Vocab, word: &str) -> Vec<usize> {
    match level {
        SubtokenLevel::Char => std::iter::once(CHAR_START)
            .chain(word.chars().map(|c| vocab.char_id(c)))
            .chain(std::iter::once(CHAR_END))
            .collect(),
        SubtokenLevel::Byte => std::iter::once(BYTE_START)
            .chain(word.bytes().map(usize::from))
            .chain(std::iter::once(BYTE_END))
            .collect(),
    }
}

/// Encodes `word` with the subtoken bi-LSTM; output width is twice the cell size.
pub fn compose_subtoken<G: Graph>(g: &mut G, enc: &SubtokenEncoder, vocab: &Vocab, word: &str) -> Result<G::Var> {
    if word.is_empty() {
        return Err(Error::EmptySequence("compose_subtoken"));
    }
    let xs = subtoken_symbols(enc.level, vocab, word)
        .into_iter()
        .map(|s| g.lookup_row(enc.table.param, s))
        .collect::<Result<Vec<_>, _>>()?;
    birnn_seq(g, &enc.forward, &enc.reverse, &xs)
}

/// Sizes of the representation layer.
#[derive(Clone, Copy, Debug)]
pub struct ReprDims {
    pub word_dim: usize,
    pub subtoken_dim: usize,
    pub hidden_dim: usize,
    pub cell: CellKind,
}

/// Parameters that turn a word form into its token vector.
#[derive(Clone, Debug)]
pub struct ReprLayer {
    pub mode: ReprMode,
    pub word: Option<EmbeddingTable>,
    pub chars: Option<SubtokenEncoder>,
    pub bytes: Option<SubtokenEncoder>,
    output_dim: usize,
}

impl ReprLayer {
    pub fn register(store: &mut ParamStore, mode: ReprMode, vocab: &Vocab, dims: ReprDims, rng: &mut Rng) -> Result<Self> {
        let word = if mode.uses_words() {
            Some(EmbeddingTable::register(store, "word.emb", vocab.num_words(), dims.word_dim, rng)?)
        } else {
            None
        };
        let mut encoder = |level: SubtokenLevel, prefix: &str, rows: usize, store: &mut ParamStore| -> Result<SubtokenEncoder> {
            let table = EmbeddingTable::register(store, &format!("{prefix}.emb"), rows, dims.subtoken_dim, rng)?;
            let forward = CellParams::register(store, &format!("{prefix}.f"), dims.cell, dims.subtoken_dim, dims.hidden_dim, rng)?;
            let reverse = CellParams::register(store, &format!("{prefix}.r"), dims.cell, dims.subtoken_dim, dims.hidden_dim, rng)?;
            Ok(SubtokenEncoder { level, table, forward, reverse })
        };
        let chars = if mode.uses_chars() {
            Some(encoder(SubtokenLevel::Char, "char", vocab.num_chars(), store)?)
        } else {
            None
        };
        let bytes = if mode.uses_bytes() {
            Some(encoder(SubtokenLevel::Byte, "byte", BYTE_SYMBOLS, store)?)
        } else {
            None
        };
        Ok(ReprLayer { mode, word, chars, bytes, output_dim: mode.output_dim(dims.word_dim, dims.hidden_dim) })
    }

    /// Rebinds to the parameters of a loaded model.
    pub fn lookup(store: &ParamStore, mode: ReprMode, dims: ReprDims) -> Result<Self> {
        let missing = |name: &str| Error::Config(format!("model is missing cell `{name}`"));
        let encoder = |level: SubtokenLevel, prefix: &str| -> Result<SubtokenEncoder> {
            let table = EmbeddingTable::lookup(store, &format!("{prefix}.emb"))?;
            let f = format!("{prefix}.f");
            let r = format!("{prefix}.r");
            let forward = CellParams::lookup(store, &f, dims.cell, dims.subtoken_dim, dims.hidden_dim).ok_or_else(|| missing(&f))?;
            let reverse = CellParams::lookup(store, &r, dims.cell, dims.subtoken_dim, dims.hidden_dim).ok_or_else(|| missing(&r))?;
            Ok(SubtokenEncoder { level, table, forward, reverse })
        };
        let word = if mode.uses_words() { Some(EmbeddingTable::lookup(store, "word.emb")?) } else { None };
        let word_dim = word.map_or(dims.word_dim, |w| w.dim);
        Ok(ReprLayer {
            mode,
            word,
            chars: if mode.uses_chars() { Some(encoder(SubtokenLevel::Char, "char")?) } else { None },
            bytes: if mode.uses_bytes() { Some(encoder(SubtokenLevel::Byte, "byte")?) } else { None },
            output_dim: mode.output_dim(word_dim, dims.hidden_dim),
        })
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Token vector for `form`. `word_id` overrides the vocabulary lookup
    /// for the word-embedding part (used to substitute the unknown word
    /// during training).
    pub fn token_repr<G: Graph>(&self, g: &mut G, vocab: &Vocab, form: &str, word_id: Option<usize>) -> Result<G::Var> {
        let mut parts = Vec::with_capacity(3);
        if let Some(table) = &self.word {
            let id = word_id.unwrap_or_else(|| vocab.word_id(form));
            parts.push(g.lookup_row(table.param, id)?);
        }
        if let Some(enc) = &self.chars {
            parts.push(compose_subtoken(g, enc, vocab, form)?);
        }
        if let Some(enc) = &self.bytes {
            parts.push(compose_subtoken(g, enc, vocab, form)?);
        }
        if parts.len() == 1 {
            return Ok(parts.pop().expect("one part"));
        }
        Ok(g.concat(&parts)?)
    }
}

/// Pre-trained word vectors read from a text file: one `token v1 v2 ...` row
/// per line, optionally after a `count dim` header line.
#[derive(Clone, Debug, Default)]
pub struct Pretrained {
    pub dim: usize,
    /// Distinct tokens in first-appearance order; a repeated token keeps its last vector.
    pub rows: Vec<(String, Vec<f64>)>,
    pub duplicates: usize,
    pub path: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub loaded: usize,
    pub missed: usize,
    pub duplicates: usize,
}

pub fn read_pretrained(path: &Path) -> Result<Pretrained> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Pretrained { path: path.to_path_buf(), ..Default::default() };
    let mut index: HashMap<String, usize> = HashMap::new();
    let malformed = |line: usize, message: String| Error::Embeddings { path: path.to_path_buf(), line, message };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        if lineno == 1 && is_count_header(&line) {
            continue;
        }
        let token = fields.next().expect("nonblank line").to_string();
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|_| malformed(lineno, format!("`{f}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(malformed(lineno, "row has no values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(malformed(lineno, "non-finite value".into()));
        }
        if out.dim == 0 {
            out.dim = values.len();
        } else if values.len() != out.dim {
            return Err(malformed(lineno, format!("expected {} values, found {}", out.dim, values.len())));
        }
        match index.get(&token) {
            Some(&at) => {
                log::warn!("{}:{lineno}: duplicate entry for `{token}`, keeping the last one", path.display());
                out.duplicates += 1;
                out.rows[at].1 = values;
            }
            None => {
                index.insert(token.clone(), out.rows.len());
                out.rows.push((token, values));
            }
        }
    }
    Ok(out)
}

fn is_count_header(line: &str) -> bool {
    let fields: Vec<&str> = line.split_whitespace().collect();
    fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok())
}

/// Overwrites the embedding rows of vocabulary words found in `pretrained`.
pub fn apply_pretrained(pretrained: &Pretrained, vocab: &Vocab, table: &EmbeddingTable, store: &mut ParamStore) -> Result<LoadStats> {
    if !pretrained.rows.is_empty() && pretrained.dim != table.dim {
        return Err(Error::Embeddings {
            path: pretrained.path.clone(),
            line: 0,
            message: format!("vectors have dimension {}, the model's word table has {}", pretrained.dim, table.dim),
        });
    }
    let mut stats = LoadStats { loaded: 0, missed: 0, duplicates: pretrained.duplicates };
    let tensor = &mut store.get_mut(table.param).tensor;
    for (token, values) in &pretrained.rows {
        let id = vocab.word_id(token);
        if id == UNK_WORD {
            stats.missed += 1;
        } else {
            tensor.row_mut(id).copy_from_slice(values);
            stats.loaded += 1;
        }
    }
    Ok(stats)
}

pub fn load_pretrained(path: &Path, vocab: &Vocab, table: &EmbeddingTable, store: &mut ParamStore) -> Result<LoadStats> {
    apply_pretrained(&read_pretrained(path)?, vocab, table, store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Eval;
    use crate::corpus::Split;
    use std::io::Write;

    fn corpus() -> Corpus {
        Corpus::from_pairs(
            Split::Train,
            &[vec![("the", "DET"), ("dog", "NOUN")], vec![("the", "DET"), ("cat", "NOUN")]],
        )
    }

    fn dims() -> ReprDims {
        ReprDims { word_dim: 6, subtoken_dim: 4, hidden_dim: 3, cell: CellKind::Lstm }
    }

    #[test]
    fn counts_from_training_split() {
        let v = Vocab::build(&corpus()).unwrap();
        assert_eq!(v.freq("the"), 2);
        assert_eq!(v.freq("dog"), 1);
        assert_eq!(v.freq("bird"), 0);
        assert_eq!(v.word_id("bird"), UNK_WORD);
        assert_eq!(v.num_words(), 4);
    }

    #[test]
    fn char_inventory_has_markers() {
        let v = Vocab::build(&corpus()).unwrap();
        for c in ['d', 'o', 'g'] {
            assert!(v.char_id(c) > CHAR_END);
        }
        assert_eq!(v.char_id('z'), UNK_CHAR);
        assert_eq!(subtoken_symbols(SubtokenLevel::Char, &v, "d"), vec![CHAR_START, v.char_id('d'), CHAR_END]);
    }

    #[test]
    fn byte_symbols_follow_utf8() {
        let v = Vocab::build(&corpus()).unwrap();
        let s = subtoken_symbols(SubtokenLevel::Byte, &v, "naïve");
        assert_eq!(s.len(), 6 + 2);
        assert_eq!(s[0], BYTE_START);
        assert_eq!(&s[3..5], &[0xC3, 0xAF]);
        assert_eq!(s[7], BYTE_END);
    }

    #[test]
    fn lookups_never_grow_vocab() {
        let v = Vocab::build(&corpus()).unwrap();
        let before = v.clone();
        let _ = (v.word_id("zebra"), v.char_id('q'), v.freq("zebra"));
        assert_eq!(v, before);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(Vocab::build(&Corpus::new(vec![], Split::Train, "")).is_err());
    }

    #[test]
    fn vocab_serde_round_trip() {
        let v = Vocab::build(&corpus()).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.word_id("cat"), v.word_id("cat"));
    }

    #[test]
    fn output_dims() {
        assert_eq!(ReprMode::W.output_dim(128, 100), 128);
        assert_eq!(ReprMode::C.output_dim(128, 100), 200);
        assert_eq!(ReprMode::B.output_dim(128, 100), 200);
        assert_eq!(ReprMode::CB.output_dim(128, 100), 400);
        assert_eq!(ReprMode::WC.output_dim(128, 100), 328);
        assert_eq!("wc".parse::<ReprMode>().unwrap(), ReprMode::WC);
        assert_eq!("c+b".parse::<ReprMode>().unwrap(), ReprMode::CB);
        assert!("x".parse::<ReprMode>().is_err());
    }

    #[test]
    fn token_repr_modes() {
        let v = Vocab::build(&corpus()).unwrap();
        let mut store = ParamStore::new();
        let mut rng = Rng::new(3);
        let w = ReprLayer::register(&mut store, ReprMode::W, &v, dims(), &mut rng).unwrap();
        let mut store_c = ParamStore::new();
        let c = ReprLayer::register(&mut store_c, ReprMode::WC, &v, dims(), &mut rng).unwrap();
        assert_eq!(c.output_dim(), 6 + 6);

        let mut g = Eval::new(&store);
        let unseen = w.token_repr(&mut g, &v, "zebra", None).unwrap();
        let unk = w.token_repr(&mut g, &v, "<anything unseen>", None).unwrap();
        assert_eq!(g.value(&unseen), g.value(&unk));
        assert_eq!(g.value(&unseen).data(), store.tensor(w.word.unwrap().param).row(UNK_WORD));

        let mut g = Eval::new(&store_c);
        let a = c.token_repr(&mut g, &v, "zebra", None).unwrap();
        let b = c.token_repr(&mut g, &v, "zebu", None).unwrap();
        let a2 = c.token_repr(&mut g, &v, "zebra", None).unwrap();
        assert_eq!(g.value(&a).len(), 12);
        assert_ne!(g.value(&a), g.value(&b));
        assert_eq!(g.value(&a), g.value(&a2));
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn word_table() -> (Vocab, ParamStore, EmbeddingTable) {
        let v = Vocab::build(&corpus()).unwrap();
        let mut store = ParamStore::new();
        let t = EmbeddingTable::register(&mut store, "word.emb", v.num_words(), 2, &mut Rng::new(0)).unwrap();
        (v, store, t)
    }

    #[test]
    fn pretrained_known_and_unknown() {
        let (v, mut store, t) = word_table();
        let f = write_tmp("the 1 2\ndog 3 4\nzebra 5 6\n");
        let stats = load_pretrained(f.path(), &v, &t, &mut store).unwrap();
        assert_eq!((stats.loaded, stats.missed), (2, 1));
        assert_eq!(store.tensor(t.param).row(v.word_id("dog")), &[3.0, 4.0]);
    }

    #[test]
    fn pretrained_skips_count_header() {
        let (v, mut store, t) = word_table();
        let f = write_tmp("3 2\nthe 1 2\n");
        assert_eq!(load_pretrained(f.path(), &v, &t, &mut store).unwrap().loaded, 1);
    }

    #[test]
    fn pretrained_empty_file() {
        let (v, mut store, t) = word_table();
        let f = write_tmp("");
        assert_eq!(load_pretrained(f.path(), &v, &t, &mut store).unwrap().loaded, 0);
    }

    #[test]
    fn pretrained_duplicate_last_wins() {
        let (v, mut store, t) = word_table();
        let f = write_tmp("the 1 2\nthe 7 8\n");
        let stats = load_pretrained(f.path(), &v, &t, &mut store).unwrap();
        assert_eq!(stats, LoadStats { loaded: 1, missed: 0, duplicates: 1 });
        assert_eq!(store.tensor(t.param).row(v.word_id("the")), &[7.0, 8.0]);
    }

    #[test]
    fn pretrained_malformed_and_dim_conflict() {
        let (v, mut store, t) = word_table();
        let bad = write_tmp("the 1 x\n");
        assert!(matches!(load_pretrained(bad.path(), &v, &t, &mut store), Err(Error::Embeddings { line: 1, .. })));
        let ragged = write_tmp("the 1 2\ndog 1 2 3\n");
        assert!(matches!(load_pretrained(ragged.path(), &v, &t, &mut store), Err(Error::Embeddings { line: 2, .. })));
        let wide = write_tmp("the 1 2 3\n");
        assert!(load_pretrained(wide.path(), &v, &t, &mut store).is_err());
    }
}
