use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pretraining hyperparameters. Every field has a default, so a JSON file
/// may list only the fields it overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub max_steps: u64,
    pub seed: u64,
    pub mask_prob: f64,
    /// Fractions of selected positions that become `[MASK]`, a random token,
    /// or stay unchanged.
    pub mask_split: [f64; 3],
    pub max_seq_len: usize,
    /// Linear warmup length; 0 keeps the learning rate constant.
    pub warmup_steps: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 128,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            max_steps: 1000,
            seed: 0,
            mask_prob: 0.15,
            mask_split: [0.8, 0.1, 0.1],
            max_seq_len: 128,
            warmup_steps: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        // zero is allowed: a frozen run is a useful control
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.mask_prob) {
            return bad(format!("mask_prob must be in [0, 1], got {}", self.mask_prob));
        }
        if self.mask_split.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad(format!("mask_split entries must be in [0, 1]: {:?}", self.mask_split));
        }
        let total: f64 = self.mask_split.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("mask_split must sum to 1, got {total}"));
        }
        if self.max_seq_len < 3 {
            return bad("max_seq_len must leave room for one token between [CLS] and [SEP]".into());
        }
        Ok(())
    }

    /// Learning rate at 1-based `step`.
    pub fn lr_at(&self, step: u64) -> f64 {
        if self.warmup_steps == 0 || step >= self.warmup_steps {
            self.learning_rate
        } else {
            self.learning_rate * step as f64 / self.warmup_steps as f64
        }
    }
}
