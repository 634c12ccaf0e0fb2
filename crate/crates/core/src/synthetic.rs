//! A generated language in which the last two characters of a word give its tag.
//!
//! Each tag owns a distinct two-letter ending and a lexicon of stems. Tag
//! sequences come from a near-uniform Markov chain, so context alone says
//! little; words are drawn Zipf-style from their tag's lexicon. Sampled
//! corpora can mix in fresh, never-listed words that still follow the rule.

use std::collections::HashSet;

use crate::autodiff::Rng;
use crate::corpus::{Corpus, Sentence, Split};

const TAG_NAMES: [&str; 12] = ["NOUN", "VERB", "ADJ", "ADV", "DET", "ADP", "PRON", "NUM", "CONJ", "PART", "PROPN", "INTJ"];
const CONSONANTS: &[u8] = b"bcdfghjklmnpqrstvwxz";
const VOWELS: &[u8] = b"aeiouy";

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_tags: usize,
    pub words_per_tag: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Share of lexicon words listed under a tag other than the one their ending marks.
    pub exception_rate: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_tags: 8,
            words_per_tag: 60,
            min_len: 4,
            max_len: 12,
            exception_rate: 0.0,
            zipf_exponent: 1.0,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticLanguage {
    config: SyntheticConfig,
    tags: Vec<String>,
    endings: Vec<String>,
    lexicon: Vec<Vec<String>>,
    zipf_cdf: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    known_stems: HashSet<String>,
}

fn stem(rng: &mut Rng) -> String {
    let syllables = 1 + rng.below(3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(CONSONANTS[rng.below(CONSONANTS.len())] as char);
        s.push(VOWELS[rng.below(VOWELS.len())] as char);
    }
    s
}

fn sample_cdf(cdf: &[f64], rng: &mut Rng) -> usize {
    let u = rng.uniform() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights.into_iter().map(|w| {
        acc += w;
        acc
    }).collect()
}

impl SyntheticLanguage {
    pub fn new(config: SyntheticConfig) -> Self {
        assert!((1..=TAG_NAMES.len()).contains(&config.n_tags), "n_tags out of range");
        assert!(config.min_len >= 1 && config.min_len <= config.max_len, "bad sentence lengths");
        let mut rng = Rng::new(config.seed);
        let tags: Vec<String> = TAG_NAMES[..config.n_tags].iter().map(|s| s.to_string()).collect();

        let mut endings = Vec::new();
        while endings.len() < config.n_tags {
            let e: String = [CONSONANTS[rng.below(CONSONANTS.len())], VOWELS[rng.below(VOWELS.len())]]
                .iter()
                .map(|&b| b as char)
                .collect();
            if !endings.contains(&e) {
                endings.push(e);
            }
        }

        let mut known_stems = HashSet::new();
        let mut lexicon = vec![Vec::new(); config.n_tags];
        for (tag, words) in lexicon.iter_mut().enumerate() {
            while words.len() < config.words_per_tag {
                let s = stem(&mut rng);
                if !known_stems.insert(s.clone()) {
                    continue;
                }
                let ending = if config.n_tags > 1 && rng.bernoulli(config.exception_rate) {
                    let other = (tag + 1 + rng.below(config.n_tags - 1)) % config.n_tags;
                    &endings[other]
                } else {
                    &endings[tag]
                };
                words.push(format!("{s}{ending}"));
            }
        }

        let zipf_cdf = cumulative((1..=config.words_per_tag).map(|r| (r as f64).powf(-config.zipf_exponent)));
        let transitions = (0..=config.n_tags)
            .map(|_| cumulative((0..config.n_tags).map(|_| rng.uniform_range(0.5, 1.5))))
            .collect();
        SyntheticLanguage { config, tags, endings, lexicon, zipf_cdf, transitions, known_stems }
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn ending(&self, tag: usize) -> &str {
        &self.endings[tag]
    }

    pub fn lexicon(&self, tag: usize) -> &[String] {
        &self.lexicon[tag]
    }

    /// The tag a word's ending marks, if any.
    pub fn tag_by_ending(&self, word: &str) -> Option<&str> {
        self.endings.iter().position(|e| word.ends_with(e.as_str())).map(|t| self.tags[t].as_str())
    }

    /// A word not in the lexicon, ending as `tag` requires.
    pub fn fresh_word(&self, tag: usize, rng: &mut Rng) -> String {
        loop {
            let s = stem(rng);
            if !self.known_stems.contains(&s) {
                return format!("{s}{}", self.endings[tag]);
            }
        }
    }

    /// Samples `n` sentences. Each token is replaced by a fresh word with
    /// probability `fresh_rate`.
    pub fn sample(&self, n: usize, fresh_rate: f64, split: Split, rng: &mut Rng) -> Corpus {
        let mut sentences = Vec::with_capacity(n);
        for _ in 0..n {
            let len = self.config.min_len + rng.below(self.config.max_len - self.config.min_len + 1);
            let mut prev = self.config.n_tags;
            let (mut forms, mut tags) = (Vec::with_capacity(len), Vec::with_capacity(len));
            for _ in 0..len {
                let tag = sample_cdf(&self.transitions[prev], rng);
                let form = if rng.bernoulli(fresh_rate) {
                    self.fresh_word(tag, rng)
                } else {
                    self.lexicon[tag][sample_cdf(&self.zipf_cdf, rng)].clone()
                };
                forms.push(form);
                tags.push(self.tags[tag].clone());
                prev = tag;
            }
            sentences.push(Sentence::new(forms, tags));
        }
        Corpus::new(sentences, split, "synthetic")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endings_mark_tags() {
        let lang = SyntheticLanguage::new(SyntheticConfig::default());
        let c = lang.sample(50, 0.3, Split::Test, &mut Rng::new(1));
        for s in c.sentences() {
            for (f, t) in s.forms.iter().zip(&s.tags) {
                assert_eq!(lang.tag_by_ending(f), Some(t.as_str()), "{f}");
            }
        }
    }

    #[test]
    fn fresh_words_are_unlisted() {
        let lang = SyntheticLanguage::new(SyntheticConfig::default());
        let listed: HashSet<&String> = (0..8).flat_map(|t| lang.lexicon(t)).collect();
        let mut rng = Rng::new(3);
        for t in 0..8 {
            assert!(!listed.contains(&lang.fresh_word(t, &mut rng)));
        }
        let c = lang.sample(100, 0.0, Split::Train, &mut rng);
        assert!(c.sentences().iter().flat_map(|s| &s.forms).all(|f| listed.contains(f)));
    }

    #[test]
    fn exceptions_break_the_rule() {
        let cfg = SyntheticConfig { exception_rate: 0.5, ..SyntheticConfig::default() };
        let lang = SyntheticLanguage::new(cfg);
        let broken = (0..8)
            .flat_map(|t| lang.lexicon(t).iter().map(move |w| (t, w)))
            .filter(|(t, w)| lang.tag_by_ending(w) != Some(lang.tags()[*t].as_str()))
            .count();
        assert!(broken > 150 && broken < 330, "{broken}");
    }

    #[test]
    fn seeded() {
        let a = SyntheticLanguage::new(SyntheticConfig::default()).sample(5, 0.3, Split::Train, &mut Rng::new(2));
        let b = SyntheticLanguage::new(SyntheticConfig::default()).sample(5, 0.3, Split::Train, &mut Rng::new(2));
        assert_eq!(a, b);
        assert!(a.sentences().iter().all(|s| (4..=12).contains(&s.len())));
    }
}
