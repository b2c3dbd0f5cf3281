use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::GeluKind;

pub const PRESET_NAMES: [&str; 5] = ["tiny", "mini", "small", "medium", "base"];

/// Encoder hyperparameters. Field names follow the usual BERT `config.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub num_attention_heads: usize,
    pub num_hidden_layers: usize,
    pub intermediate_size: usize,
    pub vocab_size: usize,
    pub max_position_embeddings: usize,
    pub type_vocab_size: usize,
    pub hidden_dropout_prob: f64,
    pub attention_probs_dropout_prob: f64,
    pub initializer_range: f64,
    pub hidden_act: GeluKind,
    pub layer_norm_eps: f64,
}

impl ModelConfig {
    /// Standard BERT shape: 4H feed-forward, 32000-token vocabulary,
    /// 512 positions, two segment types, dropout 0.1, init range 0.02.
    pub fn bert(hidden: usize, heads: usize, layers: usize) -> Self {
        Self {
            hidden_size: hidden,
            num_attention_heads: heads,
            num_hidden_layers: layers,
            intermediate_size: 4 * hidden,
            vocab_size: 32_000,
            max_position_embeddings: 512,
            type_vocab_size: 2,
            hidden_dropout_prob: 0.1,
            attention_probs_dropout_prob: 0.1,
            initializer_range: 0.02,
            hidden_act: GeluKind::Exact,
            layer_norm_eps: 1e-12,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        let (h, a, l) = match name {
            "tiny" => (128, 2, 2),
            "mini" => (256, 4, 4),
            "small" => (512, 8, 4),
            "medium" => (512, 8, 8),
            "base" => (768, 12, 12),
            _ => return None,
        };
        Some(Self::bert(h, a, l))
    }

    /// Desk-scale model for tests and toy runs.
    pub fn toy(hidden: usize, heads: usize, layers: usize, vocab_size: usize) -> Self {
        Self {
            vocab_size,
            ..Self::bert(hidden, heads, layers)
        }
    }

    pub fn with_vocab_size(mut self, vocab_size: usize) -> Self {
        self.vocab_size = vocab_size;
        self
    }

    pub fn without_dropout(mut self) -> Self {
        self.hidden_dropout_prob = 0.0;
        self.attention_probs_dropout_prob = 0.0;
        self
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_attention_heads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.hidden_size == 0 || self.num_attention_heads == 0 {
            return bad("hidden_size and num_attention_heads must be positive".into());
        }
        if !self.hidden_size.is_multiple_of(self.num_attention_heads) {
            return bad(format!(
                "hidden_size {} is not divisible by {} heads",
                self.hidden_size, self.num_attention_heads
            ));
        }
        if self.vocab_size == 0 || self.max_position_embeddings == 0 || self.type_vocab_size == 0 {
            return bad("vocab, position and type tables must be non-empty".into());
        }
        if self.intermediate_size == 0 {
            return bad("intermediate_size must be positive".into());
        }
        for (name, p) in [
            ("hidden_dropout_prob", self.hidden_dropout_prob),
            ("attention_probs_dropout_prob", self.attention_probs_dropout_prob),
        ] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1), got {p}"));
            }
        }
        if !(self.initializer_range > 0.0) || !(self.layer_norm_eps > 0.0) {
            return bad("initializer_range and layer_norm_eps must be positive".into());
        }
        Ok(())
    }

    /// Closed-form parameter count: embeddings and their layer norm, the
    /// encoder layers, and the MLM head whose decoder matrix is shared with
    /// the token embeddings (only its bias is counted). No pooler.
    pub fn count_parameters(&self) -> u64 {
        let h = self.hidden_size as u64;
        let i = self.intermediate_size as u64;
        let v = self.vocab_size as u64;
        let embeddings = v * h + self.max_position_embeddings as u64 * h + self.type_vocab_size as u64 * h + 2 * h;
        let attention = 4 * (h * h + h) + 2 * h;
        let ffn = (h * i + i) + (i * h + h) + 2 * h;
        let head = (h * h + h) + 2 * h + v;
        embeddings + self.num_hidden_layers as u64 * (attention + ffn) + head
    }

    /// Approximate forward FLOPs per token (2 per multiply-add) for the
    /// encoder stack at sequence length `seq_len`, excluding the MLM head.
    pub fn flops_per_token(&self, seq_len: usize) -> f64 {
        let h = self.hidden_size as f64;
        let i = self.intermediate_size as f64;
        let t = seq_len as f64;
        let per_layer = 4.0 * h * h + 2.0 * h * i + 2.0 * t * h;
        2.0 * self.num_hidden_layers as f64 * per_layer
    }
}

pub fn count_parameters(config: &ModelConfig) -> u64 {
    config.count_parameters()
}
