use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::embed::{embed_sentences, SentenceEncoder};
use crate::error::{Error, Result};

/// Accepted placeholder spellings.
pub const PLACEHOLDERS: [&str; 2] = ["{ }", "{}"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotSpec {
    /// Reference sentence with exactly one placeholder.
    pub template: String,
    /// Label surface forms, in class-id order.
    pub labels: Vec<String>,
}

impl ZeroShotSpec {
    pub fn new(template: impl Into<String>, labels: impl IntoIterator<Item = impl Into<String>>) -> Result<Self> {
        let s = Self {
            template: template.into(),
            labels: labels.into_iter().map(Into::into).collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let count = self.template.matches(PLACEHOLDERS[0]).count() + self.template.matches(PLACEHOLDERS[1]).count();
        if count != 1 {
            return Err(Error::Input(format!(
                "template must contain exactly one placeholder, found {count}: {:?}",
                self.template
            )));
        }
        if self.labels.len() < 2 {
            return Err(Error::Input("zero-shot needs at least two labels".into()));
        }
        Ok(())
    }

    /// The template with `label` in place of the placeholder.
    pub fn fill(&self, label: &str) -> String {
        let ph = PLACEHOLDERS.iter().find(|p| self.template.contains(*p)).expect("validated");
        self.template.replacen(ph, label, 1)
    }

    pub fn references(&self) -> Vec<String> {
        self.labels.iter().map(|l| self.fill(l)).collect()
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0)
}

/// Index of the most cosine-similar reference; ties go to the lower index.
pub fn nearest_label(references: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (i, r) in references.iter().enumerate() {
        let s = cosine(r, x);
        if s > best_sim {
            best = i;
            best_sim = s;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroShotResult {
    pub accuracy: f64,
    pub predictions: Vec<usize>,
    pub wall_s: f64,
}

/// Labels each text with the label whose filled template is most similar.
pub fn zero_shot_eval<E: SentenceEncoder + ?Sized>(
    model: &E,
    texts: &[String],
    gold: &[usize],
    spec: &ZeroShotSpec,
    batch_size: usize,
) -> Result<ZeroShotResult> {
    spec.validate()?;
    if texts.is_empty() || texts.len() != gold.len() {
        return Err(Error::Input(format!("{} texts for {} labels", texts.len(), gold.len())));
    }
    let start = Instant::now();
    let refs = spec.references();
    let ref_vecs = embed_sentences(model, &refs, batch_size)?.vectors;
    for (text, v) in refs.iter().zip(&ref_vecs) {
        if is_zero(v) {
            return Err(Error::Similarity { text: text.clone() });
        }
    }
    let vecs = embed_sentences(model, texts, batch_size)?.vectors;
    let mut predictions = Vec::with_capacity(texts.len());
    for (text, v) in texts.iter().zip(&vecs) {
        if is_zero(v) {
            return Err(Error::Similarity { text: text.clone() });
        }
        predictions.push(nearest_label(&ref_vecs, v));
    }
    let hits = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(ZeroShotResult {
        accuracy: hits as f64 / texts.len() as f64,
        predictions,
        wall_s: start.elapsed().as_secs_f64(),
    })
}
