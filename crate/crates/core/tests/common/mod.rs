//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerics.
#![allow(dead_code)]

use std::collections::BTreeMap;

use bsb_core::encoder::{ModelConfig, ParameterStore};

pub type Mat = Vec<Vec<f64>>;

pub fn tensor(p: &ParameterStore<f64>, name: &str) -> (Vec<usize>, Vec<f64>) {
    let t = p.get(name).unwrap();
    (t.shape().to_vec(), t.data().to_vec())
}

fn mat(p: &ParameterStore<f64>, name: &str) -> Mat {
    let (shape, data) = tensor(p, name);
    data.chunks(shape[1]).map(|r| r.to_vec()).collect()
}

fn vecp(p: &ParameterStore<f64>, name: &str) -> Vec<f64> {
    tensor(p, name).1
}

fn dense(x: &Mat, p: &ParameterStore<f64>, prefix: &str) -> Mat {
    let w = mat(p, &format!("{prefix}.weight"));
    let b = vecp(p, &format!("{prefix}.bias"));
    x.iter()
        .map(|row| {
            (0..b.len())
                .map(|j| {
                    let mut s = b[j];
                    for (k, xv) in row.iter().enumerate() {
                        s += xv * w[k][j];
                    }
                    s
                })
                .collect()
        })
        .collect()
}

fn norm(x: &Mat, p: &ParameterStore<f64>, prefix: &str, eps: f64) -> Mat {
    let g = vecp(p, &format!("{prefix}.gamma"));
    let b = vecp(p, &format!("{prefix}.beta"));
    x.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + eps).sqrt();
            row.iter().enumerate().map(|(i, v)| (v - mean) * inv * g[i] + b[i]).collect()
        })
        .collect()
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

/// Unbatched, unpadded forward pass with scalar loops. Returns last-layer
/// hidden states `[T][H]` and MLM logits `[T][V]`.
pub fn naive_forward(p: &ParameterStore<f64>, cfg: &ModelConfig, ids: &[u32]) -> (Mat, Mat) {
    let h = cfg.hidden_size;
    let a = cfg.num_attention_heads;
    let d = h / a;
    let t = ids.len();
    let eps = cfg.layer_norm_eps;
    let we = mat(p, "embeddings.word_embeddings");
    let pe = mat(p, "embeddings.position_embeddings");
    let te = mat(p, "embeddings.token_type_embeddings");
    let x: Mat = (0..t)
        .map(|i| (0..h).map(|k| we[ids[i] as usize][k] + pe[i][k] + te[0][k]).collect())
        .collect();
    let mut x = norm(&x, p, "embeddings.layer_norm", eps);
    for l in 0..cfg.num_hidden_layers {
        let pre = format!("encoder.layer.{l}");
        let q = dense(&x, p, &format!("{pre}.attention.query"));
        let k = dense(&x, p, &format!("{pre}.attention.key"));
        let v = dense(&x, p, &format!("{pre}.attention.value"));
        let mut ctx = vec![vec![0.0; h]; t];
        for head in 0..a {
            let off = head * d;
            for i in 0..t {
                let scores: Vec<f64> = (0..t)
                    .map(|j| (0..d).map(|c| q[i][off + c] * k[j][off + c]).sum::<f64>() / (d as f64).sqrt())
                    .collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for j in 0..t {
                    for c in 0..d {
                        ctx[i][off + c] += e[j] / z * v[j][off + c];
                    }
                }
            }
        }
        let att = dense(&ctx, p, &format!("{pre}.attention.output"));
        x = norm(&add(&att, &x), p, &format!("{pre}.attention.layer_norm"), eps);
        let mut f = dense(&x, p, &format!("{pre}.intermediate"));
        for row in &mut f {
            for v in row.iter_mut() {
                *v = gelu(*v);
            }
        }
        let f = dense(&f, p, &format!("{pre}.output"));
        x = norm(&add(&f, &x), p, &format!("{pre}.output.layer_norm"), eps);
    }
    let mut y = dense(&x, p, "mlm.transform");
    for row in &mut y {
        for v in row.iter_mut() {
            *v = gelu(*v);
        }
    }
    let y = norm(&y, p, "mlm.layer_norm", eps);
    let bias = vecp(p, "mlm.decoder.bias");
    let logits = y
        .iter()
        .map(|row| {
            (0..cfg.vocab_size)
                .map(|vv| bias[vv] + (0..h).map(|c| row[c] * we[vv][c]).sum::<f64>())
                .collect()
        })
        .collect();
    (x, logits)
}

pub fn mean_rows(x: &Mat) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x[0].len()).map(|c| x.iter().map(|r| r[c]).sum::<f64>() / n).collect()
}

/// Writes the checkpoint layout by hand, tensors in reverse name order so
/// offsets differ from the library writer's.
pub fn write_checkpoint_bytes(p: &ParameterStore<f64>, cfg: &ModelConfig) -> Vec<u8> {
    let mut header = serde_json::Map::new();
    header.insert("config".into(), serde_json::to_value(cfg).unwrap());
    header.insert(
        "aliases".into(),
        serde_json::json!({"mlm.decoder.weight": "embeddings.word_embeddings"}),
    );
    let mut blob = Vec::new();
    let names: Vec<String> = p.names().map(String::from).collect();
    for name in names.iter().rev() {
        let (shape, data) = tensor(p, name);
        let offset = blob.len();
        for v in data {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
        header.insert(
            name.clone(),
            serde_json::json!({"dtype": "f32", "shape": shape, "offset": offset, "length": blob.len() - offset}),
        );
    }
    let json = serde_json::to_vec(&serde_json::Value::Object(header)).unwrap();
    let mut out = (json.len() as u64).to_le_bytes().to_vec();
    out.extend(json);
    out.extend(blob);
    out
}

/// The same store with every value rounded through f32.
pub fn round_f32(p: &ParameterStore<f64>) -> ParameterStore<f64> {
    p.cast::<f32>().cast::<f64>()
}

/// Overwrites every tensor with seeded uniform values so that biases,
/// gammas and betas are all non-trivial.
pub fn randomize(p: &mut ParameterStore<f64>, seed: u64, scale: f64) {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let names: Vec<String> = p.names().map(String::from).collect();
    for name in names {
        let gamma = name.ends_with(".gamma");
        for v in p.get_mut(&name).unwrap().data_mut() {
            *v = if gamma { 1.0 + 0.3 * next() } else { scale * next() };
        }
    }
}

pub fn logits_digest(logits: &Mat) -> serde_json::Value {
    let row_max: Vec<f64> = logits.iter().map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
    let row_sum: Vec<f64> = logits.iter().map(|r| r.iter().sum()).collect();
    let argmax: Vec<usize> = logits
        .iter()
        .map(|r| (0..r.len()).fold(0, |b, j| if r[j] > r[b] { j } else { b }))
        .collect();
    serde_json::json!({"shape": [logits.len(), logits[0].len()], "row_max": row_max, "row_sum": row_sum, "argmax": argmax})
}

pub fn names_by_kind(p: &ParameterStore<f64>) -> BTreeMap<String, usize> {
    p.iter().map(|(n, t)| (n.to_string(), t.len())).collect()
}

use bsb_core::autograd::Tape;
use bsb_core::encoder::{init_parameters, InputBatch, Mode, ParamVars};
use bsb_core::pretrain::{batch_loss, MaskedBatch};
use bsb_core::tokenizer::Encoding;

/// The 1-layer toy encoder used for gradient checks: H=8, A=2, V=16, T=6.
pub fn gradient_toy() -> (ModelConfig, ParameterStore<f64>, MaskedBatch) {
    let mut cfg = ModelConfig::toy(8, 2, 1, 16).without_dropout();
    cfg.max_position_embeddings = 6;
    let mut p = init_parameters::<f64>(&cfg, 5).unwrap();
    randomize(&mut p, 17, 0.5);
    let enc = |ids: &[u32]| Encoding {
        ids: ids.to_vec(),
        attention_mask: vec![1; ids.len()],
        type_ids: vec![0; ids.len()],
        word_ids: vec![None; ids.len()],
    };
    // second sequence is padded to T=6
    let input = InputBatch::from_encodings(&[enc(&[2, 7, 4, 11, 9, 3]), enc(&[2, 4, 15, 3])]).unwrap();
    let mut labels = vec![None; 12];
    labels[2] = Some(12);
    labels[3] = Some(11);
    labels[8] = Some(5);
    let batch = MaskedBatch {
        input,
        labels,
        corrupted: 3,
        skipped: 0,
    };
    (cfg, p, batch)
}

pub fn toy_loss(cfg: &ModelConfig, p: &ParameterStore<f64>, batch: &MaskedBatch) -> f64 {
    let mut tape = Tape::inference();
    let vars = ParamVars::register(&mut tape, p, false).unwrap();
    let loss = batch_loss(&mut tape, &vars, cfg, batch, &mut Mode::Eval).unwrap();
    tape.value(loss).data()[0]
}

pub const GRAD_NORM_FLOOR: f64 = 1e-6;

#[derive(Debug)]
pub struct GradCheck {
    /// Worst per-tensor ‖analytic − numeric‖ / max(‖analytic‖ + ‖numeric‖, 1e-6).
    /// The floor only matters for tensors whose true gradient is zero (the
    /// key bias shifts every score of a row equally), where both sides are
    /// rounding noise.
    pub worst_relative: f64,
    pub worst_tensor: String,
    pub checked: usize,
}

/// Central differences (step 1e-5) over every element of every parameter,
/// compared with the tape gradient.
pub fn gradient_check() -> GradCheck {
    let (cfg, p, batch) = gradient_toy();
    let mut tape = Tape::new();
    let vars = ParamVars::register(&mut tape, &p, true).unwrap();
    let loss = batch_loss(&mut tape, &vars, &cfg, &batch, &mut Mode::Eval).unwrap();
    let grads = tape.backward(loss).unwrap();
    let h = 1e-5;
    let mut worst = (0.0, String::new());
    let mut checked = 0;
    for (name, var) in vars.iter() {
        let shape = p.get(name).unwrap().shape().to_vec();
        let analytic = grads.get_or_zeros(var, &shape);
        let mut q = p.clone();
        let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
        for i in 0..analytic.len() {
            let orig = q.get(name).unwrap().data()[i];
            q.get_mut(name).unwrap().data_mut()[i] = orig + h;
            let up = toy_loss(&cfg, &q, &batch);
            q.get_mut(name).unwrap().data_mut()[i] = orig - h;
            let down = toy_loss(&cfg, &q, &batch);
            q.get_mut(name).unwrap().data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data()[i];
            diff2 += (a - numeric).powi(2);
            a2 += a * a;
            n2 += numeric * numeric;
            checked += 1;
        }
        let denom = a2.sqrt() + n2.sqrt();
        let rel = diff2.sqrt() / denom.max(GRAD_NORM_FLOOR);
        if std::env::var_os("BSB_GRAD_VERBOSE").is_some() {
            eprintln!("{name}: rel {rel:.3e} |a| {:.3e} |n| {:.3e}", a2.sqrt(), n2.sqrt());
        }
        if rel > worst.0 {
            worst = (rel, name.to_string());
        }
    }
    GradCheck {
        worst_relative: worst.0,
        worst_tensor: worst.1,
        checked,
    }
}

use std::path::{Path, PathBuf};

pub const NEWS_LABELS: [&str; 6] = ["dunya", "ekonomi", "kultur-sanat", "magazin", "politika", "spor"];

/// Files for driving the command line on a toy news setup.
pub struct CliFixture {
    pub vocab: PathBuf,
    pub corpus: PathBuf,
    pub dataset: PathBuf,
    pub labels: PathBuf,
    pub model_config: PathBuf,
}

pub fn cli_fixture(dir: &Path) -> CliFixture {
    let topic_words: [&[&str]; 6] = [
        &["ülke", "savaş", "barış", "sınır"],
        &["para", "borsa", "faiz", "banka"],
        &["sanat", "müze", "sergi", "tiyatro"],
        &["ünlü", "dizi", "şarkıcı", "moda"],
        &["meclis", "seçim", "parti", "bakan"],
        &["maç", "gol", "takım", "lig"],
    ];
    let filler = ["bu", "haber", "ile", "ilgili", "yeni", "bir", "gelişme", "oldu", "çok", "içeriği", "çoğunlukla", "ilgilidir", "haberin"];
    let mut words: Vec<String> = filler.iter().map(|s| s.to_string()).collect();
    words.extend(NEWS_LABELS.iter().flat_map(|l| l.split('-').map(String::from)));
    words.push("-".into());
    words.push(".".into());
    for t in topic_words {
        words.extend(t.iter().map(|s| s.to_string()));
    }
    words.sort();
    words.dedup();
    let vocab = bsb_core::tokenizer::Vocabulary::with_specials(words).unwrap();
    let vocab_path = dir.join("vocab.txt");
    vocab.save(&vocab_path).unwrap();

    let mut corpus = String::new();
    let mut csv = String::from("text,label\n");
    for (c, t) in topic_words.iter().enumerate() {
        for i in 0..6 {
            let line = format!(
                "bu haber {} ile ilgili yeni bir {} gelişme oldu {} çok {}",
                t[i % 4],
                t[(i + 1) % 4],
                t[(i + 2) % 4],
                t[(i + 3) % 4]
            );
            corpus.push_str(&line);
            corpus.push('\n');
            csv.push_str(&format!("{line},{}\n", NEWS_LABELS[c]));
        }
    }
    let corpus_path = dir.join("corpus.txt");
    std::fs::write(&corpus_path, corpus).unwrap();
    let dataset = dir.join("news.csv");
    std::fs::write(&dataset, csv).unwrap();
    let labels = dir.join("labels.json");
    std::fs::write(
        &labels,
        serde_json::json!({"template": "Bu haberin içeriği çoğunlukla { } ile ilgilidir.", "labels": NEWS_LABELS}).to_string(),
    )
    .unwrap();
    let mut cfg = ModelConfig::toy(16, 2, 1, vocab.len());
    cfg.max_position_embeddings = 64;
    let model_config = dir.join("model.json");
    std::fs::write(&model_config, serde_json::to_string(&cfg).unwrap()).unwrap();
    CliFixture {
        vocab: vocab_path,
        corpus: corpus_path,
        dataset,
        labels,
        model_config,
    }
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn bsb(args: &[&str]) -> Run {
    bsb_env(args, &[])
}

pub fn bsb_env(args: &[&str], env: &[(&str, &Path)]) -> Run {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_bsb"));
    cmd.args(args).env_remove("BSB_OUT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Report rows without the wall-clock column.
pub fn report_values(dir: &Path) -> Vec<(String, String, String, String, u64, u64, usize)> {
    bsb_core::eval::read_report_csv(dir.join("report.csv"))
        .unwrap()
        .into_iter()
        .map(|r| (r.model, r.task, r.dataset, r.metric, r.value.to_bits(), r.std.to_bits(), r.n))
        .collect()
}
