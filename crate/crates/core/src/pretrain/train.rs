use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::config::TrainingConfig;
use super::corrupt::{mlm_corrupt, MaskedBatch};
use crate::autograd::Tape;
use crate::encoder::{encode_hidden, init_parameters, mlm_head, InputBatch, Mode, ModelConfig, ParamVars, ParameterStore};
use crate::error::{Error, Result};
use crate::tensor::Float;
use crate::tokenizer::{Encoding, Tokenizer};

/// Attempts at drawing a corruption with at least one label before a step
/// is declared impossible.
const MAX_CORRUPT_ATTEMPTS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct LossPoint {
    pub step: u64,
    pub loss: f64,
    pub masked_tokens: usize,
    /// Milliseconds since training started.
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T: Float = f64> {
    pub params: ParameterStore<T>,
    pub curve: Vec<LossPoint>,
    /// Sequences skipped by corruption for lack of maskable tokens.
    pub skipped_sequences: usize,
}

/// Loss at the labelled positions of one corrupted batch, on `tape`.
pub fn batch_loss<T: Float>(
    tape: &mut Tape<T>,
    vars: &ParamVars,
    cfg: &ModelConfig,
    batch: &MaskedBatch,
    mode: &mut Mode,
) -> Result<crate::autograd::Var> {
    let targets = batch.targets();
    if targets.is_empty() {
        return Err(Error::Contract("batch has no labelled positions".into()));
    }
    let trace = encode_hidden(tape, vars, cfg, &batch.input, mode)?;
    let rows: Vec<usize> = targets.iter().map(|&(i, _)| i).collect();
    let selected = tape.gather(trace.hidden, &rows)?;
    let logits = mlm_head(tape, vars, cfg, selected)?;
    let labels: Vec<Option<usize>> = targets.iter().map(|&(_, l)| Some(l as usize)).collect();
    tape.cross_entropy(logits, &labels)
}

fn step_err(step: u64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { op } => Error::Training {
            step,
            reason: format!("non-finite value in {op}"),
        },
        other => other,
    }
}

/// Trains freshly initialized parameters (seeded by `cfg.seed`).
pub fn train<T: Float>(
    corpus: &[String],
    tokenizer: &Tokenizer,
    model_cfg: &ModelConfig,
    cfg: &TrainingConfig,
) -> Result<TrainOutcome<T>> {
    let params = init_parameters(model_cfg, cfg.seed)?;
    train_from(params, corpus, tokenizer, model_cfg, cfg, |_| {})
}

/// Runs `cfg.max_steps` steps of corrupt → forward → loss → backward → Adam,
/// starting from `params`. `on_step` sees every loss point as it is produced.
pub fn train_from<T: Float>(
    mut params: ParameterStore<T>,
    corpus: &[String],
    tokenizer: &Tokenizer,
    model_cfg: &ModelConfig,
    cfg: &TrainingConfig,
    mut on_step: impl FnMut(&LossPoint),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    model_cfg.validate()?;
    params.validate(model_cfg)?;
    let max_len = cfg.max_seq_len.min(model_cfg.max_position_embeddings);
    let encodings: Vec<Encoding> = corpus
        .iter()
        .map(|s| tokenizer.encode(s, max_len, false))
        .collect::<Result<_>>()?;
    if encodings.is_empty() {
        return Err(Error::Input("empty training corpus".into()));
    }
    let vocab = tokenizer.vocab();
    let adam_base = AdamConfig {
        lr: cfg.learning_rate,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.adam_eps,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..encodings.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut state = AdamState::new();
    let mut curve = Vec::with_capacity(cfg.max_steps as usize);
    let mut skipped_sequences = 0;
    let start = Instant::now();

    for step in 1..=cfg.max_steps {
        let mut picked = Vec::with_capacity(cfg.batch_size);
        while picked.len() < cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            picked.push(encodings[order[cursor]].clone());
            cursor += 1;
        }
        let input = InputBatch::from_encodings(&picked)?;
        let mut batch = mlm_corrupt(&input, vocab, cfg, &mut rng);
        let mut attempts = 1;
        while batch.corrupted == 0 && batch.skipped < input.batch && attempts < MAX_CORRUPT_ATTEMPTS {
            batch = mlm_corrupt(&input, vocab, cfg, &mut rng);
            attempts += 1;
        }
        skipped_sequences += batch.skipped;
        if batch.corrupted == 0 {
            return Err(Error::Training {
                step,
                reason: "no maskable position selected in the batch".into(),
            });
        }

        let mut tape = Tape::new();
        let vars = ParamVars::register(&mut tape, &params, true)?;
        let loss = batch_loss(&mut tape, &vars, model_cfg, &batch, &mut Mode::Train(&mut rng)).map_err(step_err(step))?;
        let loss_value = tape.value(loss).data()[0].to_f64();
        let mut grads = tape.backward(loss).map_err(step_err(step))?;
        let mut named = BTreeMap::new();
        for (name, var) in vars.iter() {
            if let Some(g) = grads.take(var) {
                named.insert(name.to_owned(), g);
            }
        }
        drop(tape);
        let adam = AdamConfig {
            lr: cfg.lr_at(step),
            ..adam_base
        };
        adam_step(&mut params, &named, &mut state, &adam)?;

        let point = LossPoint {
            step,
            loss: loss_value,
            masked_tokens: batch.corrupted,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        on_step(&point);
        curve.push(point);
    }
    Ok(TrainOutcome {
        params,
        curve,
        skipped_sequences,
    })
}

/// Writes `step,loss,masked_tokens,wall_ms`.
pub fn write_loss_curve(path: impl AsRef<Path>, curve: &[LossPoint]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("step,loss,masked_tokens,wall_ms\n");
    for p in curve {
        text.push_str(&format!("{},{:e},{},{:.3}\n", p.step, p.loss, p.masked_tokens, p.wall_ms));
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
