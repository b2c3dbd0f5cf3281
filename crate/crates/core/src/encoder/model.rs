//! Encoder forward pass on a [`Tape`].

use std::collections::BTreeMap;

use rand::RngCore;

use super::config::ModelConfig;
use super::params::{layer_prefix, parameter_specs, ParameterStore, POSITION_EMBEDDINGS, TYPE_EMBEDDINGS, WORD_EMBEDDINGS};
use crate::autograd::{AttentionShape, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};
use crate::tokenizer::{Encoding, Tokenizer, MAX_SEQ_LEN};

/// A padded `[batch × seq_len]` block of token ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputBatch {
    pub batch: usize,
    pub seq_len: usize,
    pub ids: Vec<u32>,
    pub type_ids: Vec<u8>,
    pub attention_mask: Vec<u8>,
}

impl InputBatch {
    /// Pads every encoding to the longest one with id 0.
    pub fn from_encodings(encodings: &[Encoding]) -> Result<Self> {
        if encodings.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        let seq_len = encodings.iter().map(Encoding::len).max().unwrap_or(0);
        let batch = encodings.len();
        let mut ids = Vec::with_capacity(batch * seq_len);
        let mut type_ids = Vec::with_capacity(batch * seq_len);
        let mut attention_mask = Vec::with_capacity(batch * seq_len);
        for e in encodings {
            let pad = seq_len - e.len();
            ids.extend(e.ids.iter().copied().chain(std::iter::repeat_n(0, pad)));
            type_ids.extend(e.type_ids.iter().copied().chain(std::iter::repeat_n(0, pad)));
            attention_mask.extend(e.attention_mask.iter().copied().chain(std::iter::repeat_n(0, pad)));
        }
        Ok(Self {
            batch,
            seq_len,
            ids,
            type_ids,
            attention_mask,
        })
    }

    fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let n = self.batch * self.seq_len;
        if self.ids.len() != n || self.type_ids.len() != n || self.attention_mask.len() != n {
            return Err(Error::Input("batch buffers disagree with batch × seq_len".into()));
        }
        if self.seq_len == 0 {
            return Err(Error::Input("empty sequences".into()));
        }
        if self.seq_len > cfg.max_position_embeddings.min(MAX_SEQ_LEN) {
            return Err(Error::Input(format!(
                "sequence length {} exceeds {}",
                self.seq_len,
                cfg.max_position_embeddings.min(MAX_SEQ_LEN)
            )));
        }
        if let Some(&id) = self.ids.iter().find(|&&id| id as usize >= cfg.vocab_size) {
            return Err(Error::Input(format!("token id {id} >= vocab size {}", cfg.vocab_size)));
        }
        if let Some(&t) = self.type_ids.iter().find(|&&t| t as usize >= cfg.type_vocab_size) {
            return Err(Error::Input(format!("token type {t} >= {}", cfg.type_vocab_size)));
        }
        Ok(())
    }
}

/// Dropout is only active in `Train`.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

/// Parameter tensors registered as leaves on one tape.
pub struct ParamVars {
    vars: BTreeMap<String, Var>,
}

impl ParamVars {
    /// Puts every tensor of `store` on `tape`, as trainable leaves when
    /// `trainable` is set.
    pub fn register<T: Float>(tape: &mut Tape<T>, store: &ParameterStore<T>, trainable: bool) -> Result<Self> {
        let mut vars = BTreeMap::new();
        for name in store.names() {
            let t = store.shared(name)?;
            let v = if trainable { tape.param(t) } else { tape.constant(t) };
            vars.insert(name.to_owned(), v);
        }
        Ok(Self { vars })
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Validation(format!("missing parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Tape handles produced by [`encode_hidden`].
pub struct EncoderTrace {
    /// Last-layer hidden states, `[batch·seq × hidden]`.
    pub hidden: Var,
    /// One attention node per layer (see [`Tape::attention_probs`]).
    pub attention: Vec<Var>,
}

fn dense<T: Float>(tape: &mut Tape<T>, p: &ParamVars, x: Var, prefix: &str) -> Result<Var> {
    let w = p.get(&format!("{prefix}.weight"))?;
    let b = p.get(&format!("{prefix}.bias"))?;
    let y = tape.matmul(x, w)?;
    tape.add_bias(y, b)
}

fn norm<T: Float>(tape: &mut Tape<T>, p: &ParamVars, x: Var, prefix: &str, eps: f64) -> Result<Var> {
    let g = p.get(&format!("{prefix}.gamma"))?;
    let b = p.get(&format!("{prefix}.beta"))?;
    tape.layer_norm(x, g, b, eps)
}

fn dropout<T: Float>(tape: &mut Tape<T>, x: Var, p: f64, mode: &mut Mode) -> Result<Var> {
    match mode {
        Mode::Eval => Ok(x),
        Mode::Train(rng) => tape.dropout(x, p, &mut **rng),
    }
}

/// Embeddings followed by the encoder layers.
pub fn encode_hidden<T: Float>(
    tape: &mut Tape<T>,
    p: &ParamVars,
    cfg: &ModelConfig,
    input: &InputBatch,
    mode: &mut Mode,
) -> Result<EncoderTrace> {
    input.check(cfg)?;
    let (b, t) = (input.batch, input.seq_len);
    let eps = cfg.layer_norm_eps;

    let ids: Vec<usize> = input.ids.iter().map(|&i| i as usize).collect();
    let positions: Vec<usize> = (0..b * t).map(|i| i % t).collect();
    let types: Vec<usize> = input.type_ids.iter().map(|&i| i as usize).collect();
    let words = tape.gather(p.get(WORD_EMBEDDINGS)?, &ids)?;
    let pos = tape.gather(p.get(POSITION_EMBEDDINGS)?, &positions)?;
    let typ = tape.gather(p.get(TYPE_EMBEDDINGS)?, &types)?;
    let x = tape.add(words, pos)?;
    let x = tape.add(x, typ)?;
    let x = norm(tape, p, x, "embeddings.layer_norm", eps)?;
    let mut x = dropout(tape, x, cfg.hidden_dropout_prob, mode)?;

    let key_mask: Vec<bool> = input.attention_mask.iter().map(|&m| m != 0).collect();
    let mut attention = Vec::with_capacity(cfg.num_hidden_layers);
    for l in 0..cfg.num_hidden_layers {
        let pre = layer_prefix(l);
        let q = dense(tape, p, x, &format!("{pre}.attention.query"))?;
        let k = dense(tape, p, x, &format!("{pre}.attention.key"))?;
        let v = dense(tape, p, x, &format!("{pre}.attention.value"))?;
        let shape = AttentionShape {
            batch: b,
            seq_len: t,
            heads: cfg.num_attention_heads,
            key_mask: key_mask.clone(),
        };
        let ctx = match mode {
            Mode::Train(rng) if cfg.attention_probs_dropout_prob > 0.0 => {
                tape.attention(q, k, v, shape, Some((cfg.attention_probs_dropout_prob, &mut **rng)))?
            }
            _ => tape.attention::<dyn RngCore>(q, k, v, shape, None)?,
        };
        attention.push(ctx);
        let a = dense(tape, p, ctx, &format!("{pre}.attention.output"))?;
        let a = dropout(tape, a, cfg.hidden_dropout_prob, mode)?;
        let a = tape.add(a, x)?;
        x = norm(tape, p, a, &format!("{pre}.attention.layer_norm"), eps)?;

        let f = dense(tape, p, x, &format!("{pre}.intermediate"))?;
        let f = tape.gelu(f, cfg.hidden_act)?;
        let f = dense(tape, p, f, &format!("{pre}.output"))?;
        let f = dropout(tape, f, cfg.hidden_dropout_prob, mode)?;
        let f = tape.add(f, x)?;
        x = norm(tape, p, f, &format!("{pre}.output.layer_norm"), eps)?;
    }
    Ok(EncoderTrace { hidden: x, attention })
}

/// MLM head on `[rows × hidden]` states: dense, gelu, layer norm, then the
/// decoder that reuses the token-embedding matrix.
pub fn mlm_head<T: Float>(tape: &mut Tape<T>, p: &ParamVars, cfg: &ModelConfig, hidden: Var) -> Result<Var> {
    let h = dense(tape, p, hidden, "mlm.transform")?;
    let h = tape.gelu(h, cfg.hidden_act)?;
    let h = norm(tape, p, h, "mlm.layer_norm", cfg.layer_norm_eps)?;
    let logits = tape.matmul_nt(h, p.get(WORD_EMBEDDINGS)?)?;
    tape.add_bias(logits, p.get("mlm.decoder.bias")?)
}

/// Materialized result of [`forward`].
#[derive(Clone, Debug)]
pub struct ForwardOutput<T: Float> {
    /// `[batch × seq × hidden]`.
    pub hidden: Tensor<T>,
    /// `[batch × seq × vocab]`.
    pub logits: Tensor<T>,
    /// Per layer, `[batch × heads × seq × seq]` attention probabilities.
    pub attention_probs: Vec<Vec<T>>,
}

/// Full forward pass: hidden states and MLM logits for every position.
pub fn forward<T: Float>(
    params: &ParameterStore<T>,
    cfg: &ModelConfig,
    input: &InputBatch,
    mut mode: Mode,
) -> Result<ForwardOutput<T>> {
    // a recording tape keeps the attention probabilities around
    let mut tape = Tape::new();
    let p = ParamVars::register(&mut tape, params, false)?;
    let trace = encode_hidden(&mut tape, &p, cfg, input, &mut mode)?;
    let logits = mlm_head(&mut tape, &p, cfg, trace.hidden)?;
    let (b, t, h, v) = (input.batch, input.seq_len, cfg.hidden_size, cfg.vocab_size);
    let attention_probs = trace
        .attention
        .iter()
        .map(|&a| tape.attention_probs(a).map(<[T]>::to_vec).unwrap_or_default())
        .collect();
    Ok(ForwardOutput {
        hidden: tape.value(trace.hidden).clone().reshape(&[b, t, h])?,
        logits: tape.value(logits).clone().reshape(&[b, t, v])?,
        attention_probs,
    })
}

/// Attention-mask-weighted mean of `[batch·seq × hidden]` states.
pub fn mean_pool<T: Float>(hidden: &Tensor<T>, input: &InputBatch) -> Vec<Vec<f64>> {
    let h = hidden.last_dim();
    (0..input.batch)
        .map(|s| {
            let mut acc = vec![0.0f64; h];
            let mut n = 0usize;
            for i in 0..input.seq_len {
                let r = s * input.seq_len + i;
                if input.attention_mask[r] == 0 {
                    continue;
                }
                n += 1;
                for (a, &x) in acc.iter_mut().zip(&hidden.data()[r * h..(r + 1) * h]) {
                    *a += x.to_f64();
                }
            }
            let n = n.max(1) as f64;
            acc.into_iter().map(|a| a / n).collect()
        })
        .collect()
}

/// Encoder weights bundled with the tokenizer that feeds them.
#[derive(Clone, Debug)]
pub struct EncoderModel<T: Float = f64> {
    pub config: ModelConfig,
    pub params: ParameterStore<T>,
    pub tokenizer: Tokenizer,
    /// Encode-time truncation length.
    pub max_len: usize,
}

impl<T: Float> EncoderModel<T> {
    pub fn new(config: ModelConfig, params: ParameterStore<T>, tokenizer: Tokenizer) -> Result<Self> {
        config.validate()?;
        params.validate(&config)?;
        if tokenizer.vocab().len() > config.vocab_size {
            return Err(Error::Validation(format!(
                "tokenizer has {} tokens but the model only {}",
                tokenizer.vocab().len(),
                config.vocab_size
            )));
        }
        let max_len = config.max_position_embeddings.min(MAX_SEQ_LEN);
        Ok(Self {
            config,
            params,
            tokenizer,
            max_len,
        })
    }

    pub fn encode(&self, text: &str) -> Result<Encoding> {
        self.tokenizer.encode(text, self.max_len, false)
    }

    /// Eval-mode last-layer states, `[batch·seq × hidden]`.
    pub fn hidden_states(&self, input: &InputBatch) -> Result<Tensor<T>> {
        let mut tape = Tape::inference();
        let p = ParamVars::register(&mut tape, &self.params, false)?;
        let trace = encode_hidden(&mut tape, &p, &self.config, input, &mut Mode::Eval)?;
        Ok(tape.value(trace.hidden).clone())
    }

    /// Eval-mode MLM logits at the given `(sequence, position)` pairs.
    pub fn logits_at(&self, input: &InputBatch, queries: &[(usize, usize)]) -> Result<Tensor<T>> {
        let mut tape = Tape::inference();
        let p = ParamVars::register(&mut tape, &self.params, false)?;
        let trace = encode_hidden(&mut tape, &p, &self.config, input, &mut Mode::Eval)?;
        let rows: Vec<usize> = queries.iter().map(|&(s, i)| s * input.seq_len + i).collect();
        let selected = tape.gather(trace.hidden, &rows)?;
        let logits = mlm_head(&mut tape, &p, &self.config, selected)?;
        Ok(tape.value(logits).clone())
    }

    /// Mean-pooled sentence vectors for `texts`, one batch.
    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let encs = texts.iter().map(|t| self.encode(t)).collect::<Result<Vec<_>>>()?;
        let input = InputBatch::from_encodings(&encs)?;
        let hidden = self.hidden_states(&input)?;
        Ok(mean_pool(&hidden, &input))
    }

    pub fn cast<U: Float>(&self) -> EncoderModel<U> {
        EncoderModel {
            config: self.config.clone(),
            params: self.params.cast(),
            tokenizer: self.tokenizer.clone(),
            max_len: self.max_len,
        }
    }
}

/// Parameter names whose gradients training needs, in canonical order.
pub fn trainable_names(cfg: &ModelConfig) -> Vec<String> {
    parameter_specs(cfg).into_iter().map(|s| s.name).collect()
}
