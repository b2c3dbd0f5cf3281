//! Uncased text normalization, WordPiece tokenization and vocabulary
//! learning, plus the corpus and dataset filters.

mod filters;
mod normalize;
mod trainer;
mod vocab;
mod wordpiece;

pub use filters::{
    charlen_filter, corpus_filter, word_count, MASK_EVAL_MAX_CHARS, MASK_EVAL_MIN_CHARS, MIN_SENTENCE_WORDS,
};
pub use normalize::{normalize, normalize_bytes, NormalizerConfig, UnicodeForm};
pub use trainer::{build_vocab, VocabTrainer};
pub use vocab::{Vocabulary, CLS, CONTINUATION_PREFIX, MASK, PAD, SEP, SPECIAL_TOKENS, UNK};
pub use wordpiece::{
    is_punctuation, pre_tokenize, wordpiece_tokenize, Encoding, Tokenizer, DEFAULT_MAX_CHARS_PER_WORD, MAX_SEQ_LEN,
};
