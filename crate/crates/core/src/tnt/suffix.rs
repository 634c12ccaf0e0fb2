//! Suffix tries for unknown words, smoothed by successive abstraction.

use std::collections::BTreeMap;

#[derive(Clone, Debug)]
struct Node {
    children: BTreeMap<char, usize>,
    counts: Vec<f64>,
    dist: Vec<f64>,
}

impl Node {
    fn new(n_tags: usize) -> Self {
        Node { children: BTreeMap::new(), counts: vec![0.0; n_tags], dist: vec![0.0; n_tags] }
    }
}

/// Tag counts keyed by reversed word endings. Node 0 is the empty suffix.
#[derive(Clone, Debug)]
pub struct SuffixTrie {
    nodes: Vec<Node>,
    max_len: usize,
}

impl SuffixTrie {
    pub fn new(n_tags: usize, max_len: usize) -> Self {
        SuffixTrie { nodes: vec![Node::new(n_tags)], max_len }
    }

    /// Adds a word's per-tag counts along every suffix up to `max_len` characters.
    pub fn insert(&mut self, word: &str, counts: &[u64]) {
        let mut node = 0;
        self.add_counts(node, counts);
        for c in word.chars().rev().take(self.max_len) {
            node = match self.nodes[node].children.get(&c) {
                Some(&child) => child,
                None => {
                    let child = self.nodes.len();
                    self.nodes.push(Node::new(counts.len()));
                    self.nodes[node].children.insert(c, child);
                    child
                }
            };
            self.add_counts(node, counts);
        }
    }

    fn add_counts(&mut self, node: usize, counts: &[u64]) {
        for (acc, &c) in self.nodes[node].counts.iter_mut().zip(counts) {
            *acc += c as f64;
        }
    }

    /// Computes node distributions: relative frequencies at the root, then
    /// `(P̂(t|suffix) + θ·P(t|shorter suffix)) / (1 + θ)` going down.
    pub fn smooth(&mut self, theta: f64) {
        let root_total: f64 = self.nodes[0].counts.iter().sum();
        self.nodes[0].dist = if root_total > 0.0 {
            self.nodes[0].counts.iter().map(|c| c / root_total).collect()
        } else {
            vec![0.0; self.nodes[0].counts.len()]
        };
        // children are always pushed after their parent
        for parent in 0..self.nodes.len() {
            let children: Vec<usize> = self.nodes[parent].children.values().copied().collect();
            for child in children {
                let total: f64 = self.nodes[child].counts.iter().sum();
                let dist = self.nodes[child]
                    .counts
                    .iter()
                    .zip(&self.nodes[parent].dist)
                    .map(|(c, p)| (c / total + theta * p) / (1.0 + theta))
                    .collect();
                self.nodes[child].dist = dist;
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes[0].counts.iter().all(|&c| c == 0.0)
    }

    pub fn prior(&self) -> &[f64] {
        &self.nodes[0].dist
    }

    /// Smoothed tag distribution of the longest stored suffix of `word`.
    pub fn lookup(&self, word: &str) -> &[f64] {
        &self.nodes[self.longest_match(word).1].dist
    }

    /// Length in characters and node of the longest stored suffix of `word`.
    pub fn longest_match(&self, word: &str) -> (usize, usize) {
        let mut node = 0;
        let mut len = 0;
        for c in word.chars().rev().take(self.max_len) {
            match self.nodes[node].children.get(&c) {
                Some(&child) => {
                    node = child;
                    len += 1;
                }
                None => break,
            }
        }
        (len, node)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Every node distribution, root first.
    pub fn distributions(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.iter().map(|n| n.dist.as_slice())
    }
}

/// Unknown-word model: one trie for words starting with an uppercase letter, one for the rest.
#[derive(Clone, Debug)]
pub struct SuffixModel {
    pub upper: SuffixTrie,
    pub lower: SuffixTrie,
    pub theta: f64,
}

pub fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

impl SuffixModel {
    /// Builds both tries from the words seen at most `max_freq` times.
    pub fn build<'a>(
        lexicon: impl IntoIterator<Item = (&'a str, &'a [u64])>,
        n_tags: usize,
        max_len: usize,
        max_freq: u64,
        theta: f64,
    ) -> Self {
        let mut upper = SuffixTrie::new(n_tags, max_len);
        let mut lower = SuffixTrie::new(n_tags, max_len);
        for (word, counts) in lexicon {
            if counts.iter().sum::<u64>() > max_freq {
                continue;
            }
            if is_capitalized(word) {
                upper.insert(word, counts);
            } else {
                lower.insert(word, counts);
            }
        }
        upper.smooth(theta);
        lower.smooth(theta);
        SuffixModel { upper, lower, theta }
    }

    /// `P(t | suffix) / P(t)` for each tag, proportional to `P(word | t)`.
    /// Uses the trie matching the word's capitalization, the other one if that
    /// is empty, and a flat score if both are.
    pub fn tag_ratios(&self, word: &str) -> Vec<f64> {
        let (first, second) = if is_capitalized(word) { (&self.upper, &self.lower) } else { (&self.lower, &self.upper) };
        let trie = if !first.is_empty() {
            first
        } else if !second.is_empty() {
            second
        } else {
            return vec![1.0; self.upper.prior().len()];
        };
        trie.lookup(word)
            .iter()
            .zip(trie.prior())
            .map(|(&p, &prior)| if prior > 0.0 { p / prior } else { 0.0 })
            .collect()
    }
}

/// Sample standard deviation of a probability vector; 0 for fewer than two entries.
pub fn successive_abstraction_weight(tag_probs: &[f64]) -> f64 {
    let s = tag_probs.len();
    if s < 2 {
        return 0.0;
    }
    let mean = 1.0 / s as f64;
    let var = tag_probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon() -> Vec<(String, Vec<u64>)> {
        vec![
            ("running".into(), vec![0, 2]),
            ("jumping".into(), vec![0, 1]),
            ("table".into(), vec![3, 0]),
            ("Paris".into(), vec![1, 0]),
            ("the".into(), vec![40, 0]),
        ]
    }

    fn model(theta: f64) -> SuffixModel {
        let lex = lexicon();
        SuffixModel::build(lex.iter().map(|(w, c)| (w.as_str(), c.as_slice())), 2, 10, 10, theta)
    }

    #[test]
    fn frequent_words_excluded() {
        let m = model(0.5);
        assert_eq!(m.lower.prior(), &[3.0 / 6.0, 3.0 / 6.0]);
        assert_eq!(m.upper.prior(), &[1.0, 0.0]);
    }

    #[test]
    fn distributions_sum_to_one() {
        let m = model(0.3);
        for d in m.lower.distributions().chain(m.upper.distributions()) {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn abstraction_by_hand() {
        // "g" node: counts [0, 3], parent prior [0.5, 0.5]
        let m = model(0.5);
        let (len, _) = m.lower.longest_match("bang");
        assert_eq!(len, 2);
        let g = m.lower.lookup("zzg");
        assert!((g[1] - (1.0 + 0.5 * 0.5) / 1.5).abs() < 1e-15);
    }

    #[test]
    fn unmatched_suffix_is_flat_over_seen_tags() {
        let m = model(0.5);
        assert_eq!(m.tag_ratios("xyz"), vec![1.0, 1.0]);
        // upper trie only ever saw tag 0
        assert_eq!(m.upper.lookup("Qx"), &[1.0, 0.0]);
        assert_eq!(m.tag_ratios("Qx"), vec![1.0, 0.0]);
    }

    #[test]
    fn capitalization_matters() {
        let m = model(0.5);
        assert_ne!(m.tag_ratios("Runnings"), m.tag_ratios("runnings"));
    }

    #[test]
    fn empty_tries_fall_back() {
        let m = SuffixModel::build(std::iter::empty(), 3, 10, 10, 0.1);
        assert_eq!(m.tag_ratios("Word"), vec![1.0; 3]);
        let lex = lexicon();
        let only_lower = SuffixModel::build(lex.iter().filter(|(w, _)| w != "Paris").map(|(w, c)| (w.as_str(), c.as_slice())), 2, 10, 10, 0.1);
        assert_eq!(only_lower.tag_ratios("Xing"), only_lower.tag_ratios("xing"));
    }

    #[test]
    fn suffix_length_capped() {
        let mut t = SuffixTrie::new(1, 3);
        t.insert("abcdef", &[1]);
        assert_eq!(t.num_nodes(), 4);
        assert_eq!(t.longest_match("zzdef").0, 3);
    }

    #[test]
    fn theta_is_standard_deviation() {
        assert_eq!(successive_abstraction_weight(&[1.0]), 0.0);
        // mean 1/2, deviations ±0.3, variance 0.18
        assert!((successive_abstraction_weight(&[0.8, 0.2]) - 0.18f64.sqrt()).abs() < 1e-15);
    }
}
