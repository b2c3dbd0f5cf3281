use std::time::Instant;

use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::tensor::Float;

/// Anything that maps a batch of texts to fixed-size vectors.
pub trait SentenceEncoder {
    fn dim(&self) -> usize;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;
}

impl<T: Float> SentenceEncoder for EncoderModel<T> {
    fn dim(&self) -> usize {
        self.config.hidden_size
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        EncoderModel::embed_batch(self, texts)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    /// `[N × dim]`.
    pub vectors: Vec<Vec<f64>>,
    /// Time spent in the whole batched loop.
    pub wall_s: f64,
}

/// Eval-mode sentence vectors in batches of `batch_size`.
pub fn embed_sentences<E: SentenceEncoder + ?Sized>(model: &E, texts: &[String], batch_size: usize) -> Result<Embeddings> {
    if batch_size == 0 {
        return Err(Error::Input("batch_size must be positive".into()));
    }
    let start = Instant::now();
    let mut vectors = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(batch_size) {
        let refs: Vec<&str> = chunk.iter().map(String::as_str).collect();
        vectors.extend(model.embed_batch(&refs)?);
    }
    Ok(Embeddings {
        vectors,
        wall_s: start.elapsed().as_secs_f64(),
    })
}
