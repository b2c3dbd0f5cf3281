use super::normalize::NormalizerConfig;
use super::vocab::{Vocabulary, CONTINUATION_PREFIX, UNK};
use crate::error::{Error, Result};

/// Longest sequence the position table supports.
pub const MAX_SEQ_LEN: usize = 512;
pub const DEFAULT_MAX_CHARS_PER_WORD: usize = 100;

/// Greedy longest-match-first segmentation of a single word.
///
/// Words longer than `max_chars` characters, or with any suffix that has no
/// matching piece, become a single `[UNK]`.
pub fn wordpiece_tokenize<'v>(word: &str, vocab: &'v Vocabulary, max_chars: usize) -> Vec<&'v str> {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }
    let unk = || vec![vocab.token(vocab.unk_id()).unwrap_or(UNK)];
    if chars.len() > max_chars {
        return unk();
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut candidate = String::new();
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while start < end {
            candidate.clear();
            if start > 0 {
                candidate.push_str(CONTINUATION_PREFIX);
            }
            candidate.extend(&chars[start..end]);
            if let Some(id) = vocab.id(&candidate) {
                found = Some(id);
                break;
            }
            end -= 1;
        }
        match found {
            Some(id) => pieces.push(vocab.token(id).expect("id from vocab")),
            None => return unk(),
        }
        start = end;
    }
    pieces
}

/// Punctuation is split off into its own word, as the BERT basic tokenizer does.
pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c as u32,
            0x00A1 | 0x00A7 | 0x00AB | 0x00B6 | 0x00B7 | 0x00BB | 0x00BF
            | 0x2010..=0x2027 | 0x2030..=0x205E | 0x3001..=0x3003 | 0x3008..=0x3011)
}

/// Splits normalized text into `(whitespace-word index, unit)` pairs where
/// punctuation characters are separate units.
pub fn pre_tokenize(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    for (w, word) in text.split_whitespace().enumerate() {
        let mut start = 0;
        for (i, c) in word.char_indices() {
            if is_punctuation(c) {
                if start < i {
                    out.push((w, &word[start..i]));
                }
                out.push((w, &word[i..i + c.len_utf8()]));
                start = i + c.len_utf8();
            }
        }
        if start < word.len() {
            out.push((w, &word[start..]));
        }
    }
    out
}

/// Model input for one sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoding {
    pub ids: Vec<u32>,
    /// 1 for real tokens, 0 for padding.
    pub attention_mask: Vec<u8>,
    pub type_ids: Vec<u8>,
    /// Whitespace-word index in the normalized text; `None` for special tokens.
    pub word_ids: Vec<Option<usize>>,
}

impl Encoding {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of non-padding positions.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    /// Extends with `[PAD]` up to `len`.
    pub fn pad_to(&mut self, len: usize, pad_id: u32) {
        while self.ids.len() < len {
            self.ids.push(pad_id);
            self.attention_mask.push(0);
            self.type_ids.push(0);
            self.word_ids.push(None);
        }
    }
}

/// Normalizer + vocabulary + WordPiece settings.
#[derive(Clone, Debug)]
pub struct Tokenizer {
    vocab: Vocabulary,
    normalizer: NormalizerConfig,
    max_chars_per_word: usize,
}

impl Tokenizer {
    pub fn new(vocab: Vocabulary, normalizer: NormalizerConfig) -> Self {
        Self {
            vocab,
            normalizer,
            max_chars_per_word: DEFAULT_MAX_CHARS_PER_WORD,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn normalizer(&self) -> &NormalizerConfig {
        &self.normalizer
    }

    /// Word pieces of `text` with their whitespace-word index, no specials.
    pub fn pieces(&self, text: &str) -> Vec<(usize, u32)> {
        let norm = self.normalizer.normalize(text);
        let mut out = Vec::new();
        for (w, unit) in pre_tokenize(&norm) {
            for piece in wordpiece_tokenize(unit, &self.vocab, self.max_chars_per_word) {
                out.push((w, self.vocab.id(piece).expect("piece from vocab")));
            }
        }
        out
    }

    /// `[CLS] pieces [SEP]`, truncated from the tail to `max_len`, and padded
    /// to exactly `max_len` when `pad` is set.
    pub fn encode(&self, text: &str, max_len: usize, pad: bool) -> Result<Encoding> {
        if max_len > MAX_SEQ_LEN {
            return Err(Error::Input(format!("max_len {max_len} exceeds {MAX_SEQ_LEN}")));
        }
        if max_len < 2 {
            return Err(Error::Input(format!("max_len {max_len} cannot hold [CLS] and [SEP]")));
        }
        let mut pieces = self.pieces(text);
        pieces.truncate(max_len - 2);
        let n = pieces.len() + 2;
        let mut ids = Vec::with_capacity(n);
        let mut word_ids = Vec::with_capacity(n);
        ids.push(self.vocab.cls_id());
        word_ids.push(None);
        for (w, id) in pieces {
            ids.push(id);
            word_ids.push(Some(w));
        }
        ids.push(self.vocab.sep_id());
        word_ids.push(None);
        let mut enc = Encoding {
            attention_mask: vec![1; n],
            type_ids: vec![0; n],
            ids,
            word_ids,
        };
        if pad {
            enc.pad_to(max_len, self.vocab.pad_id());
        }
        Ok(enc)
    }

    /// Reassembles the normalized text from an encoding by dropping specials,
    /// stripping `##`, and joining whitespace words with single spaces.
    pub fn reassemble(&self, enc: &Encoding) -> String {
        let mut out = String::new();
        let mut last_word = None;
        for (&id, &w) in enc.ids.iter().zip(&enc.word_ids) {
            let Some(w) = w else { continue };
            if self.vocab.is_special(id) && id != self.vocab.unk_id() {
                continue;
            }
            let tok = self.vocab.token(id).unwrap_or_default();
            if last_word.is_some() && last_word != Some(w) {
                out.push(' ');
            }
            out.push_str(tok.strip_prefix(CONTINUATION_PREFIX).unwrap_or(tok));
            last_word = Some(w);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn toy() -> Vocabulary {
        Vocabulary::with_specials([
            "merha", "##ba", "m", "##e", "##r", "##h", "##a", "##b", "dünya", "su", "ılık", "##lar", ",", "!", "ev",
        ])
        .unwrap()
    }

    #[test]
    fn greedy_longest_match() {
        let v = toy();
        assert_eq!(wordpiece_tokenize("merhaba", &v, 100), vec!["merha", "##ba"]);
        assert_eq!(wordpiece_tokenize("dünya", &v, 100), vec!["dünya"]);
        assert_eq!(wordpiece_tokenize("xyzq", &v, 100), vec!["[UNK]"]);
        assert_eq!(wordpiece_tokenize("evlar", &v, 100), vec!["ev", "##lar"]);
        // partial match with an unmatched tail is still UNK
        assert_eq!(wordpiece_tokenize("evx", &v, 100), vec!["[UNK]"]);
        assert_eq!(wordpiece_tokenize("merhaba", &v, 5), vec!["[UNK]"]);
    }

    #[test]
    fn encode_structure() {
        let tok = Tokenizer::new(toy(), NormalizerConfig::default());
        let e = tok.encode("", 16, false).unwrap();
        assert_eq!(e.ids, vec![2, 3]);
        let e = tok.encode("Merhaba, Dünya!", 16, true).unwrap();
        assert_eq!(e.len(), 16);
        assert_eq!(e.ids[0], tok.vocab().cls_id());
        assert_eq!(e.real_len(), 2 + 5);
        assert_eq!(e.ids[e.real_len() - 1], tok.vocab().sep_id());
        assert_eq!(tok.reassemble(&e), "merhaba, dünya!");
    }

    #[test]
    fn truncation_keeps_the_head() {
        let tok = Tokenizer::new(toy(), NormalizerConfig::default());
        let e = tok.encode("ev su ılık dünya", 4, false).unwrap();
        assert_eq!(e.len(), 4);
        assert_eq!(tok.reassemble(&e), "ev su");
        assert!(tok.encode("ev", 513, false).is_err());
        assert!(tok.encode("ev", 1, false).is_err());
    }

    proptest! {
        #[test]
        fn first_piece_is_longest_prefix(word in "[a-zçğıöşü]{1,12}") {
            let v = toy();
            let pieces = wordpiece_tokenize(&word, &v, 100);
            if pieces != ["[UNK]"] {
                let first = pieces[0];
                prop_assert!(word.starts_with(first));
                let longest = (1..=word.chars().count())
                    .map(|n| word.chars().take(n).collect::<String>())
                    .filter(|p| v.contains(p))
                    .max_by_key(|p| p.len())
                    .unwrap();
                prop_assert_eq!(first, longest.as_str());
            }
        }

        #[test]
        fn encode_invariants(words in prop::collection::vec("(ev|su|ılık|dünya|merhaba|xyz|,|!)", 0..40), max_len in 2usize..24) {
            let tok = Tokenizer::new(toy(), NormalizerConfig::default());
            let text = words.join(" ");
            let e = tok.encode(&text, max_len, true).unwrap();
            prop_assert_eq!(e.len(), max_len);
            prop_assert!(e.ids.iter().all(|&id| (id as usize) < tok.vocab().len()));
            let real = e.real_len();
            prop_assert!(e.attention_mask[..real].iter().all(|&m| m == 1));
            prop_assert!(e.attention_mask[real..].iter().all(|&m| m == 0));
            prop_assert_eq!(e.ids[0], tok.vocab().cls_id());
            prop_assert_eq!(e.ids[real - 1], tok.vocab().sep_id());
            let n_pieces = tok.pieces(&text).len().min(max_len - 2);
            prop_assert_eq!(real, n_pieces + 2);
        }
    }
}
