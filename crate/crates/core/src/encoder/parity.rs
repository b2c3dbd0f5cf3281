//! Comparison against reference activations produced by another
//! implementation of the same encoder.
//!
//! A reference file is a JSON array (or a single object) of
//! `{sentence, logits_digest, embedding, tolerance}` records, optionally with
//! the full `logits` matrix. The digest holds the logits shape plus per-row
//! maximum and sum; `embedding` is the mask-weighted mean of the last hidden
//! layer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{forward, EncoderModel, InputBatch, Mode};
use crate::error::{Error, Result};
use crate::tensor::Float;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitsDigest {
    /// `[seq_len, vocab_size]`.
    pub shape: Vec<usize>,
    pub row_max: Vec<f64>,
    pub row_sum: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argmax: Option<Vec<usize>>,
}

impl LogitsDigest {
    /// Digest of a row-major `[rows × cols]` matrix.
    pub fn of(rows: usize, cols: usize, data: &[f64]) -> Self {
        let mut row_max = Vec::with_capacity(rows);
        let mut row_sum = Vec::with_capacity(rows);
        let mut argmax = Vec::with_capacity(rows);
        for r in data.chunks(cols) {
            let (i, m) = r
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bm), (i, &x)| if x > bm { (i, x) } else { (bi, bm) });
            row_max.push(m);
            argmax.push(i);
            row_sum.push(r.iter().sum());
        }
        Self {
            shape: vec![rows, cols],
            row_max,
            row_sum,
            argmax: Some(argmax),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceActivation {
    pub sentence: String,
    pub logits_digest: LogitsDigest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<Vec<f64>>>,
    pub embedding: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<ReferenceActivation>),
    One(ReferenceActivation),
}

pub fn parse_references(json: &str) -> Result<Vec<ReferenceActivation>> {
    let refs = match serde_json::from_str::<OneOrMany>(json)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(r) => vec![r],
    };
    for r in &refs {
        let d = &r.logits_digest;
        let rows = d.shape.first().copied().unwrap_or(0);
        if d.shape.len() != 2 || d.row_max.len() != rows || d.row_sum.len() != rows {
            return Err(Error::Validation(format!("inconsistent logits digest for {:?}", r.sentence)));
        }
        if !(r.tolerance > 0.0) {
            return Err(Error::Validation(format!("non-positive tolerance for {:?}", r.sentence)));
        }
    }
    Ok(refs)
}

pub fn load_references(path: impl AsRef<Path>) -> Result<Vec<ReferenceActivation>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_references(&text)
}

/// Outcome of comparing one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct ParityResult {
    pub sentence: String,
    /// Largest absolute difference over every compared logit statistic.
    pub logits_max_abs: f64,
    pub embedding_max_abs: f64,
    pub tolerance: f64,
    pub argmax_agrees: bool,
}

impl ParityResult {
    pub fn passed(&self) -> bool {
        self.logits_max_abs <= self.tolerance && self.embedding_max_abs <= self.tolerance && self.argmax_agrees
    }
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs `model` on each reference sentence (unpadded, eval mode) and
/// compares logits and pooled embedding.
pub fn check_parity<T: Float>(model: &EncoderModel<T>, refs: &[ReferenceActivation]) -> Result<Vec<ParityResult>> {
    refs.iter()
        .map(|r| {
            let enc = model.encode(&r.sentence)?;
            let input = InputBatch::from_encodings(std::slice::from_ref(&enc))?;
            let out = forward(&model.params, &model.config, &input, Mode::Eval)?;
            let (t, v) = (input.seq_len, model.config.vocab_size);
            let d = &r.logits_digest;
            if d.shape != [t, v] {
                return Err(Error::Validation(format!(
                    "reference logits shape {:?} but model produced [{t}, {v}] for {:?}",
                    d.shape, r.sentence
                )));
            }
            if r.embedding.len() != model.config.hidden_size {
                return Err(Error::Validation(format!(
                    "reference embedding has {} dims, model hidden size is {}",
                    r.embedding.len(),
                    model.config.hidden_size
                )));
            }
            let logits: Vec<f64> = out.logits.data().iter().map(|x| x.to_f64()).collect();
            let ours = LogitsDigest::of(t, v, &logits);
            let mut diff = max_abs(&ours.row_max, &d.row_max).max(max_abs(&ours.row_sum, &d.row_sum));
            if let Some(full) = &r.logits {
                if full.len() != t || full.iter().any(|row| row.len() != v) {
                    return Err(Error::Validation(format!("reference logits matrix is not [{t}, {v}]")));
                }
                for (row, theirs) in logits.chunks(v).zip(full) {
                    diff = diff.max(max_abs(row, theirs));
                }
            }
            let argmax_agrees = d.argmax.as_ref().is_none_or(|a| Some(a) == ours.argmax.as_ref());
            let hidden = out.hidden.reshape(&[t, model.config.hidden_size])?;
            let emb = super::model::mean_pool(&hidden, &input).remove(0);
            Ok(ParityResult {
                sentence: r.sentence.clone(),
                logits_max_abs: diff,
                embedding_max_abs: max_abs(&emb, &r.embedding),
                tolerance: r.tolerance,
                argmax_agrees,
            })
        })
        .collect()
}
