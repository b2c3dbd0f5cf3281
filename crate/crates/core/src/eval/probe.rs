//! Dense classification probe trained on frozen sentence vectors.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::Tape;
use crate::error::{Error, Result};
use crate::pretrain::{adam_update, AdamConfig};
use crate::tensor::{matmul, GeluKind, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSpec {
    pub hidden: Vec<usize>,
    pub activation: GeluKind,
    pub train_fraction: f64,
    pub repetitions: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            hidden: vec![256, 128, 64],
            activation: GeluKind::Exact,
            train_fraction: 0.8,
            repetitions: 10,
            epochs: 30,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult {
    pub mean: f64,
    /// Population standard deviation over repetitions.
    pub std: f64,
    /// Best test accuracy of each repetition.
    pub per_repetition: Vec<f64>,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-class shuffled split; each class contributes `round(fraction · n_c)`
/// examples to the training side.
pub fn stratified_split<R: Rng + ?Sized>(
    labels: &[usize],
    n_classes: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(rng);
        let k = (fraction * idx.len() as f64).round() as usize;
        if k == 0 || k == idx.len() {
            return Err(Error::Stratification(format!(
                "class {c} has {} examples, too few for a {fraction} split",
                idx.len()
            )));
        }
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

struct Mlp {
    layers: Vec<(Arc<Tensor>, Arc<Tensor>)>,
    activation: GeluKind,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    fn new<R: Rng + ?Sized>(widths: &[usize], activation: GeluKind, rng: &mut R) -> Self {
        let layers = widths
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let weight = Tensor::from_fn(&[w[0], w[1]], |_| rng.random_range(-limit..limit));
                (Arc::new(weight), Arc::new(Tensor::zeros(&[w[1]])))
            })
            .collect();
        Self { layers, activation }
    }

    fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let mut z = matmul(&h, w)?;
            let n = b.len();
            for row in z.data_mut().chunks_mut(n) {
                for (v, bias) in row.iter_mut().zip(b.data()) {
                    *v += bias;
                }
            }
            h = if i + 1 < self.layers.len() {
                crate::tensor::gelu(&z, self.activation)?
            } else {
                z
            };
        }
        Ok(h)
    }

    fn accuracy(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        let logits = self.logits(x)?;
        let k = logits.last_dim();
        let hits = logits
            .data()
            .chunks(k)
            .zip(labels)
            .filter(|(row, &y)| (0..k).fold(0, |b, j| if row[j] > row[b] { j } else { b }) == y)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

fn rows_of(x: &[Vec<f64>], idx: &[usize]) -> Result<Tensor> {
    let d = x[0].len();
    Tensor::new(vec![idx.len(), d], idx.iter().flat_map(|&i| x[i].iter().copied()).collect())
}

fn train_once(x: &[Vec<f64>], labels: &[usize], n_classes: usize, spec: &ProbeSpec, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train, test) = stratified_split(labels, n_classes, spec.train_fraction, &mut rng)?;
    let mut widths = vec![x[0].len()];
    widths.extend(&spec.hidden);
    widths.push(n_classes);
    let mut mlp = Mlp::new(&widths, spec.activation, &mut rng);
    let mut moments: Vec<[Vec<f64>; 4]> = mlp
        .layers
        .iter()
        .map(|(w, b)| [vec![0.0; w.len()], vec![0.0; w.len()], vec![0.0; b.len()], vec![0.0; b.len()]])
        .collect();
    let adam = AdamConfig {
        lr: spec.learning_rate,
        ..Default::default()
    };
    let x_test = rows_of(x, &test)?;
    let y_test: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let mut order = train.clone();
    let mut best = 0.0f64;
    let mut step = 0u64;
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(spec.batch_size) {
            step += 1;
            let mut tape = Tape::new();
            let mut h = tape.constant(rows_of(x, batch)?);
            let mut vars = Vec::with_capacity(mlp.layers.len());
            for (i, (w, b)) in mlp.layers.iter().enumerate() {
                let (wv, bv) = (tape.param(w.clone()), tape.param(b.clone()));
                vars.push((wv, bv));
                let z = tape.matmul(h, wv)?;
                let z = tape.add_bias(z, bv)?;
                h = if i + 1 < mlp.layers.len() { tape.gelu(z, spec.activation)? } else { z };
            }
            let ys: Vec<Option<usize>> = batch.iter().map(|&i| Some(labels[i])).collect();
            let loss = tape.cross_entropy(h, &ys)?;
            let mut grads = tape.backward(loss)?;
            let gs: Vec<_> = vars
                .iter()
                .map(|&(wv, bv)| (grads.take(wv), grads.take(bv)))
                .collect();
            drop(tape);
            for (((w, b), (gw, gb)), m) in mlp.layers.iter_mut().zip(gs).zip(&mut moments) {
                let [mw, vw, mb, vb] = m;
                if let Some(gw) = gw {
                    adam_update(Arc::make_mut(w).data_mut(), gw.data(), mw, vw, &adam, step);
                }
                if let Some(gb) = gb {
                    adam_update(Arc::make_mut(b).data_mut(), gb.data(), mb, vb, &adam, step);
                }
            }
        }
        best = best.max(mlp.accuracy(&x_test, &y_test)?);
    }
    Ok(best)
}

/// Trains one probe per repetition (seed `spec.seed + r`) on a fresh
/// stratified split and reports the mean and spread of the best per-epoch
/// test accuracies.
pub fn probe_eval(embeddings: &[Vec<f64>], labels: &[usize], n_classes: usize, spec: &ProbeSpec) -> Result<ProbeResult> {
    if n_classes < 2 {
        return Err(Error::Input("probe needs at least two classes".into()));
    }
    if spec.repetitions == 0 || spec.epochs == 0 || spec.batch_size == 0 {
        return Err(Error::Input("repetitions, epochs and batch_size must be positive".into()));
    }
    if embeddings.is_empty() || embeddings.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} embeddings for {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    let d = embeddings[0].len();
    if d == 0 || embeddings.iter().any(|e| e.len() != d) {
        return Err(Error::Input("embeddings must share one non-zero width".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Input(format!("label {l} with {n_classes} classes")));
    }
    let per_repetition = (0..spec.repetitions)
        .map(|r| train_once(embeddings, labels, n_classes, spec, spec.seed + r as u64))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = mean_std(&per_repetition);
    Ok(ProbeResult {
        mean,
        std,
        per_repetition,
    })
}
