//! A synthetic corpus in which every token is recoverable from its
//! neighbours, and leave-one-out mask accuracy on it.

use crate::encoder::{EncoderModel, InputBatch};
use crate::error::Result;
use crate::tensor::Float;
use crate::tokenizer::Vocabulary;

pub const GRAMMAR_WORDS: usize = 16;
pub const GRAMMAR_SENTENCE_LEN: usize = 8;
pub const GRAMMAR_STRIDES: [usize; 2] = [1, 3];

pub fn grammar_word(i: usize) -> String {
    format!("w{}", i % GRAMMAR_WORDS)
}

/// Special tokens plus the grammar words.
pub fn grammar_vocab() -> Vocabulary {
    Vocabulary::with_specials((0..GRAMMAR_WORDS).map(grammar_word)).expect("distinct words")
}

/// Walks of length 8 around a cycle of 16 words, with stride 1 or 3, from
/// every start word: 32 sentences. Two neighbours fix the stride and the
/// position, so any single hidden word has exactly one consistent value.
pub fn grammar_corpus() -> Vec<String> {
    let mut out = Vec::new();
    for &stride in &GRAMMAR_STRIDES {
        for start in 0..GRAMMAR_WORDS {
            let words: Vec<String> = (0..GRAMMAR_SENTENCE_LEN).map(|i| grammar_word(start + i * stride)).collect();
            out.push(words.join(" "));
        }
    }
    out
}

/// Fraction of (sentence, position) pairs where masking just that position
/// yields the original token as the top-1 prediction. Ties go to the lower id.
pub fn leave_one_out_accuracy<T: Float>(model: &EncoderModel<T>, sentences: &[String]) -> Result<f64> {
    let vocab = model.tokenizer.vocab();
    let mut hits = 0usize;
    let mut total = 0usize;
    for s in sentences {
        let enc = model.encode(s)?;
        let positions: Vec<usize> = (0..enc.len()).filter(|&i| !vocab.is_special(enc.ids[i])).collect();
        let copies: Vec<_> = positions
            .iter()
            .map(|&p| {
                let mut e = enc.clone();
                e.ids[p] = vocab.mask_id();
                e
            })
            .collect();
        let input = InputBatch::from_encodings(&copies)?;
        let queries: Vec<(usize, usize)> = positions.iter().enumerate().map(|(k, &p)| (k, p)).collect();
        let logits = model.logits_at(&input, &queries)?;
        for (k, &p) in positions.iter().enumerate() {
            let row = logits.row(k);
            let best = (0..row.len()).fold(0, |b, j| if row[j].to_f64() > row[b].to_f64() { j } else { b });
            hits += usize::from(best as u32 == enc.ids[p]);
            total += 1;
        }
    }
    Ok(hits as f64 / total.max(1) as f64)
}
