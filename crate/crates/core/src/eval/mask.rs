use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::{EncoderModel, InputBatch};
use crate::error::{Error, Result};
use crate::tensor::Float;
use crate::tokenizer::{Encoding, Vocabulary};

/// One example with `[MASK]` at `positions`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedExample {
    /// Index of the source text in the evaluated list.
    pub example_index: usize,
    pub encoding: Encoding,
    pub positions: Vec<usize>,
}

/// A model that scores every vocabulary entry at masked positions.
pub trait MaskedLanguageModel {
    fn vocab(&self) -> &Vocabulary;

    fn encode(&self, text: &str) -> Result<Encoding>;

    /// For each example, one logit row of length `vocab().len()` per masked
    /// position, in the order of `positions`.
    fn masked_logits(&self, examples: &[MaskedExample]) -> Result<Vec<Vec<Vec<f64>>>>;
}

impl<T: Float> MaskedLanguageModel for EncoderModel<T> {
    fn vocab(&self) -> &Vocabulary {
        self.tokenizer.vocab()
    }

    fn encode(&self, text: &str) -> Result<Encoding> {
        EncoderModel::encode(self, text)
    }

    fn masked_logits(&self, examples: &[MaskedExample]) -> Result<Vec<Vec<Vec<f64>>>> {
        let encs: Vec<Encoding> = examples.iter().map(|e| e.encoding.clone()).collect();
        let input = InputBatch::from_encodings(&encs)?;
        let queries: Vec<(usize, usize)> = examples
            .iter()
            .enumerate()
            .flat_map(|(s, e)| e.positions.iter().map(move |&p| (s, p)))
            .collect();
        let logits = self.logits_at(&input, &queries)?;
        let v = self.tokenizer.vocab().len();
        let mut rows = (0..queries.len()).map(|r| logits.row(r)[..v].iter().map(|x| x.to_f64()).collect());
        Ok(examples
            .iter()
            .map(|e| rows.by_ref().take(e.positions.len()).collect())
            .collect())
    }
}

/// Position of `label` in the descending order of `logits`, ties ordered by
/// lower id first.
pub fn rank_of(logits: &[f64], label: usize) -> usize {
    let y = logits[label];
    logits
        .iter()
        .enumerate()
        .filter(|&(j, &x)| x > y || (x == y && j < label))
        .count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskEvalResult {
    pub top1: f64,
    pub top5: f64,
    pub examples: usize,
    pub positions: usize,
    /// Texts with fewer than `k_masks` maskable tokens.
    pub skipped: usize,
    pub wall_s: f64,
}

/// Masks `k_masks` distinct random non-special positions per text and scores
/// top-1 / top-5 accuracy over all masked positions.
pub fn mask_eval<M: MaskedLanguageModel + ?Sized>(
    model: &M,
    texts: &[String],
    k_masks: usize,
    seed: u64,
    batch_size: usize,
) -> Result<MaskEvalResult> {
    if k_masks == 0 || batch_size == 0 {
        return Err(Error::Input("k_masks and batch_size must be positive".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = model.vocab();
    let mut examples = Vec::new();
    let mut skipped = 0;
    for (i, text) in texts.iter().enumerate() {
        let mut enc = model.encode(text)?;
        let maskable: Vec<usize> = (0..enc.len()).filter(|&p| !vocab.is_special(enc.ids[p])).collect();
        if maskable.len() < k_masks {
            skipped += 1;
            continue;
        }
        let mut positions: Vec<usize> = sample(&mut rng, maskable.len(), k_masks).into_iter().map(|j| maskable[j]).collect();
        positions.sort_unstable();
        let originals: Vec<u32> = positions.iter().map(|&p| enc.ids[p]).collect();
        for &p in &positions {
            enc.ids[p] = vocab.mask_id();
        }
        examples.push((
            MaskedExample {
                example_index: i,
                encoding: enc,
                positions,
            },
            originals,
        ));
    }
    if examples.is_empty() {
        return Err(Error::Input(format!(
            "no text has {k_masks} maskable tokens ({skipped} skipped)"
        )));
    }
    let (mut top1, mut top5, mut total) = (0usize, 0usize, 0usize);
    for chunk in examples.chunks(batch_size) {
        let batch: Vec<MaskedExample> = chunk.iter().map(|(e, _)| e.clone()).collect();
        let logits = model.masked_logits(&batch)?;
        for ((_, originals), rows) in chunk.iter().zip(&logits) {
            for (&label, row) in originals.iter().zip(rows) {
                let r = rank_of(row, label as usize);
                top1 += usize::from(r == 0);
                top5 += usize::from(r < 5);
                total += 1;
            }
        }
    }
    Ok(MaskEvalResult {
        top1: top1 as f64 / total as f64,
        top5: top5 as f64 / total as f64,
        examples: examples.len(),
        positions: total,
        skipped,
        wall_s: start.elapsed().as_secs_f64(),
    })
}
