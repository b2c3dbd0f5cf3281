//! WordPiece vocabulary learning for small corpora.
//!
//! Words start split into characters (continuations carry `##`). Each round
//! merges the adjacent pair with the highest
//! `freq(pair) / (freq(left) · freq(right))` score, until the target size is
//! reached or no pair meets `min_frequency`.

use std::collections::{BTreeMap, BTreeSet};

use super::normalize::NormalizerConfig;
use super::vocab::{Vocabulary, CONTINUATION_PREFIX, SPECIAL_TOKENS};
use super::wordpiece::pre_tokenize;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct VocabTrainer {
    pub target_size: usize,
    pub min_frequency: u64,
    pub normalizer: NormalizerConfig,
}

fn merged(left: &str, right: &str) -> String {
    let mut s = left.to_owned();
    s.push_str(right.strip_prefix(CONTINUATION_PREFIX).unwrap_or(right));
    s
}

impl VocabTrainer {
    pub fn new(target_size: usize, min_frequency: u64) -> Self {
        Self {
            target_size,
            min_frequency,
            normalizer: NormalizerConfig::default(),
        }
    }

    pub fn train<I, S>(&self, corpus: I) -> Result<Vocabulary>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if self.target_size <= SPECIAL_TOKENS.len() {
            return Err(Error::Input(format!(
                "target size {} must exceed the {} special tokens",
                self.target_size,
                SPECIAL_TOKENS.len()
            )));
        }
        if self.min_frequency == 0 {
            return Err(Error::Input("min_frequency must be at least 1".into()));
        }

        let mut word_counts: BTreeMap<String, u64> = BTreeMap::new();
        for line in corpus {
            let norm = self.normalizer.normalize(line.as_ref());
            for (_, unit) in pre_tokenize(&norm) {
                *word_counts.entry(unit.to_owned()).or_default() += 1;
            }
        }
        if word_counts.is_empty() {
            return Err(Error::Input("empty corpus".into()));
        }

        let mut words: Vec<(Vec<String>, u64)> = word_counts
            .into_iter()
            .map(|(w, n)| {
                let pieces = w
                    .chars()
                    .enumerate()
                    .map(|(i, c)| if i == 0 { c.to_string() } else { format!("{CONTINUATION_PREFIX}{c}") })
                    .collect();
                (pieces, n)
            })
            .collect();

        let mut alphabet: BTreeMap<&str, u64> = BTreeMap::new();
        for (pieces, n) in &words {
            for p in pieces {
                *alphabet.entry(p.as_str()).or_default() += n;
            }
        }
        let mut vocab: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut seen: BTreeSet<String> = vocab.iter().cloned().collect();
        for (tok, n) in &alphabet {
            if *n >= self.min_frequency && seen.insert(tok.to_string()) {
                vocab.push(tok.to_string());
            }
        }

        while vocab.len() < self.target_size {
            let mut unit_freq: BTreeMap<&str, u64> = BTreeMap::new();
            let mut pair_freq: BTreeMap<(&str, &str), u64> = BTreeMap::new();
            for (pieces, n) in &words {
                for p in pieces {
                    *unit_freq.entry(p.as_str()).or_default() += n;
                }
                for w in pieces.windows(2) {
                    *pair_freq.entry((w[0].as_str(), w[1].as_str())).or_default() += n;
                }
            }
            // BTreeMap order makes the first maximum the lexicographically smallest pair
            let mut best: Option<((&str, &str), f64)> = None;
            for (&(l, r), &pf) in &pair_freq {
                if pf < self.min_frequency || seen.contains(&merged(l, r)) {
                    continue;
                }
                let score = pf as f64 / (unit_freq[l] as f64 * unit_freq[r] as f64);
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some(((l, r), score));
                }
            }
            let Some(((l, r), _)) = best else { break };
            let (l, r) = (l.to_owned(), r.to_owned());
            let token = merged(&l, &r);
            for (pieces, _) in words.iter_mut() {
                let mut i = 0;
                while i + 1 < pieces.len() {
                    if pieces[i] == l && pieces[i + 1] == r {
                        pieces[i] = token.clone();
                        pieces.remove(i + 1);
                    }
                    i += 1;
                }
            }
            seen.insert(token.clone());
            vocab.push(token);
        }
        Vocabulary::new(vocab)
    }
}

/// Learns a WordPiece vocabulary from `corpus` lines.
pub fn build_vocab<I, S>(corpus: I, target_size: usize, min_frequency: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    VocabTrainer::new(target_size, min_frequency).train(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::Tokenizer;

    #[test]
    fn repeated_word_becomes_whole_token() {
        let corpus = vec!["bir"; 20];
        let v = build_vocab(&corpus, 10, 1).unwrap();
        assert!(v.contains("bir"), "{:?}", v.tokens());
        assert!(v.len() <= 10);
    }

    #[test]
    fn min_frequency_threshold() {
        // "q" occurs twice, everything else often
        let mut corpus = vec!["aa ab"; 10];
        corpus.push("q");
        corpus.push("q");
        let v = build_vocab(&corpus, 50, 3).unwrap();
        assert!(!v.contains("q"));
        assert!(v.contains("aa"));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let empty: Vec<&str> = vec!["", "   "];
        assert!(matches!(build_vocab(&empty, 10, 1), Err(Error::Input(_))));
        assert!(build_vocab(["a"], 5, 1).is_err());
    }

    #[test]
    fn two_word_corpus_segments_without_unk() {
        let corpus = ["kitaplar okunur", "kitap okur", "okunur kitaplar kitap"];
        let v = build_vocab(corpus, 30, 1).unwrap();
        let tok = Tokenizer::new(v.clone(), NormalizerConfig::default());
        for line in corpus {
            let enc = tok.encode(line, 64, false).unwrap();
            assert!(!enc.ids.contains(&v.unk_id()), "{line}");
            assert_eq!(tok.reassemble(&enc), line);
        }
    }

    #[test]
    fn deterministic() {
        let corpus = ["ev evler evde", "su sular suda", "ev su"];
        assert_eq!(build_vocab(corpus, 25, 1).unwrap(), build_vocab(corpus, 25, 1).unwrap());
    }
}
