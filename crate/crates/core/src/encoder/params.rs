use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

pub const WORD_EMBEDDINGS: &str = "embeddings.word_embeddings";
pub const POSITION_EMBEDDINGS: &str = "embeddings.position_embeddings";
pub const TYPE_EMBEDDINGS: &str = "embeddings.token_type_embeddings";
/// Name under which the tied MLM decoder matrix is aliased.
pub const DECODER_WEIGHT_ALIAS: &str = "mlm.decoder.weight";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// Embedding tables and dense matrices, drawn from the truncated normal.
    Weight,
    Bias,
    /// Layer-norm scale, initialised to one.
    Gamma,
    /// Layer-norm shift, initialised to zero.
    Beta,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

pub fn layer_prefix(i: usize) -> String {
    format!("encoder.layer.{i}")
}

/// Every tensor of the encoder + MLM head, in canonical order.
///
/// Dense weights are stored `[in × out]` so that a layer is `x · W + b`.
pub fn parameter_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let (h, i) = (cfg.hidden_size, cfg.intermediate_size);
    let mut specs = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, kind| specs.push(ParamSpec { name, shape, kind });
    let dense = |push: &mut dyn FnMut(String, Vec<usize>, ParamKind), p: &str, n_in: usize, n_out: usize| {
        push(format!("{p}.weight"), vec![n_in, n_out], ParamKind::Weight);
        push(format!("{p}.bias"), vec![n_out], ParamKind::Bias);
    };
    let norm = |push: &mut dyn FnMut(String, Vec<usize>, ParamKind), p: &str| {
        push(format!("{p}.gamma"), vec![h], ParamKind::Gamma);
        push(format!("{p}.beta"), vec![h], ParamKind::Beta);
    };

    push(WORD_EMBEDDINGS.into(), vec![cfg.vocab_size, h], ParamKind::Weight);
    push(POSITION_EMBEDDINGS.into(), vec![cfg.max_position_embeddings, h], ParamKind::Weight);
    push(TYPE_EMBEDDINGS.into(), vec![cfg.type_vocab_size, h], ParamKind::Weight);
    norm(&mut push, "embeddings.layer_norm");
    for l in 0..cfg.num_hidden_layers {
        let p = layer_prefix(l);
        for proj in ["query", "key", "value", "output"] {
            dense(&mut push, &format!("{p}.attention.{proj}"), h, h);
        }
        norm(&mut push, &format!("{p}.attention.layer_norm"));
        dense(&mut push, &format!("{p}.intermediate"), h, i);
        dense(&mut push, &format!("{p}.output"), i, h);
        norm(&mut push, &format!("{p}.output.layer_norm"));
    }
    dense(&mut push, "mlm.transform", h, h);
    norm(&mut push, "mlm.layer_norm");
    push("mlm.decoder.bias".into(), vec![cfg.vocab_size], ParamKind::Bias);
    specs
}

/// Named weight tensors for one encoder + MLM head.
///
/// Tensors sit behind `Arc` so a forward pass can put them on a tape without
/// copying; mutation goes through [`ParameterStore::get_mut`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterStore<T: Float = f64> {
    tensors: BTreeMap<String, Arc<Tensor<T>>>,
}

impl<T: Float> Default for ParameterStore<T> {
    fn default() -> Self {
        Self {
            tensors: BTreeMap::new(),
        }
    }
}

impl<T: Float> ParameterStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) -> Option<Arc<Tensor<T>>> {
        self.tensors.insert(name.into(), Arc::new(t))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .get(name)
            .map(|t| t.as_ref())
            .ok_or_else(|| Error::Validation(format!("missing parameter {name}")))
    }

    pub fn shared(&self, name: &str) -> Result<Arc<Tensor<T>>> {
        self.tensors
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Validation(format!("missing parameter {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.tensors
            .get_mut(name)
            .map(Arc::make_mut)
            .ok_or_else(|| Error::Validation(format!("missing parameter {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v.as_ref()))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn total_elements(&self) -> u64 {
        self.tensors.values().map(|t| t.len() as u64).sum()
    }

    pub fn cast<U: Float>(&self) -> ParameterStore<U> {
        ParameterStore {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), Arc::new(v.cast())))
                .collect(),
        }
    }

    /// Checks that the store holds exactly the tensors `cfg` requires.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let specs = parameter_specs(cfg);
        for spec in &specs {
            let t = self.get(&spec.name)?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::Validation(format!(
                    "{} has shape {:?}, config requires {:?}",
                    spec.name,
                    t.shape(),
                    spec.shape
                )));
            }
        }
        if self.tensors.len() != specs.len() {
            let known: std::collections::HashSet<_> = specs.iter().map(|s| s.name.as_str()).collect();
            let extra: Vec<_> = self.names().filter(|n| !known.contains(n)).collect();
            return Err(Error::Validation(format!("unexpected parameters {extra:?}")));
        }
        Ok(())
    }
}

/// Draws from N(0, σ²) truncated to ±2σ by rejection.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}

/// Fresh parameters: weights from a ±2σ truncated normal with
/// σ = `initializer_range`, biases and layer-norm betas zero, gammas one.
/// Deterministic in `seed`.
pub fn init_parameters<T: Float>(cfg: &ModelConfig, seed: u64) -> Result<ParameterStore<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::new();
    for spec in parameter_specs(cfg) {
        let t = match spec.kind {
            ParamKind::Weight => {
                Tensor::from_fn(&spec.shape, |_| T::from_f64(truncated_normal(&mut rng, cfg.initializer_range)))
            }
            ParamKind::Bias | ParamKind::Beta => Tensor::zeros(&spec.shape),
            ParamKind::Gamma => Tensor::ones(&spec.shape),
        };
        store.insert(spec.name, t);
    }
    Ok(store)
}
