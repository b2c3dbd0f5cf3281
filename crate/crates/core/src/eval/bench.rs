use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::embed::embed_sentences;
use crate::encoder::{init_parameters, EncoderModel, ModelConfig};
use crate::error::{Error, Result};
use crate::tokenizer::{NormalizerConfig, Tokenizer, Vocabulary, CONTINUATION_PREFIX};

/// Sequence length used for the per-token FLOP estimate when none is given.
pub const FLOP_REFERENCE_SEQ_LEN: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub model: String,
    pub parameters: u64,
    pub flops_per_token: f64,
    /// Timed runs, warmup excluded.
    pub runs_s: Vec<f64>,
    pub median_s: f64,
    pub sentences_per_s: f64,
    pub sentences: usize,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// `n` sentences of `words` whole-word tokens drawn from `vocab`.
pub fn synthetic_sentences(vocab: &Vocabulary, n: usize, words: usize, seed: u64) -> Vec<String> {
    let pool: Vec<&str> = vocab
        .regular_ids()
        .into_iter()
        .filter_map(|id| vocab.token(id))
        .filter(|t| !t.starts_with(CONTINUATION_PREFIX))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..words)
                .map(|_| pool[rng.random_range(0..pool.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// Special tokens plus `tokNNN` words up to `size` entries.
pub fn synthetic_vocab(size: usize) -> Result<Vocabulary> {
    Vocabulary::with_specials((0..size.saturating_sub(5)).map(|i| format!("tok{i}")))
}

/// Times `embed_sentences` for each model in turn: one discarded warmup
/// pass, then `repeats` timed passes. Models are built (f32, random weights
/// from `seed`) one at a time and dropped before the next.
pub fn bench_vectorize(
    models: &[(String, ModelConfig)],
    vocab: &Vocabulary,
    texts: &[String],
    batch_size: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if repeats < 3 {
        return Err(Error::Input(format!("repeats must be at least 3, got {repeats}")));
    }
    let tokenizer = Tokenizer::new(vocab.clone(), NormalizerConfig::default());
    let mut rows = Vec::with_capacity(models.len());
    for (name, cfg) in models {
        let cfg = cfg.clone().with_vocab_size(cfg.vocab_size.max(vocab.len()));
        let params = init_parameters::<f32>(&cfg, seed)?;
        let model = EncoderModel::new(cfg.clone(), params, tokenizer.clone())?;
        embed_sentences(&model, texts, batch_size)?;
        let runs_s = (0..repeats)
            .map(|_| embed_sentences(&model, texts, batch_size).map(|e| e.wall_s))
            .collect::<Result<Vec<_>>>()?;
        let median_s = median(&runs_s);
        rows.push(BenchRow {
            model: name.clone(),
            parameters: cfg.count_parameters(),
            flops_per_token: cfg.flops_per_token(FLOP_REFERENCE_SEQ_LEN),
            sentences_per_s: texts.len() as f64 / median_s,
            median_s,
            runs_s,
            sentences: texts.len(),
        });
    }
    Ok(rows)
}

/// CSV with one line per model; `flop_ratio_vs_first` compares each model's
/// per-token FLOP estimate with the first row.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("model,parameters,flops_per_token,flop_ratio_vs_first,median_s,min_s,max_s,sentences_per_s,sentences\n");
    let base = rows.first().map_or(1.0, |r| r.flops_per_token);
    for r in rows {
        let min = r.runs_s.iter().copied().fold(f64::INFINITY, f64::min);
        let max = r.runs_s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!(
            "{},{},{:e},{:.3},{:.6},{:.6},{:.6},{:.3},{}\n",
            r.model,
            r.parameters,
            r.flops_per_token,
            r.flops_per_token / base,
            r.median_s,
            min,
            max,
            r.sentences_per_s,
            r.sentences
        ));
    }
    out
}
