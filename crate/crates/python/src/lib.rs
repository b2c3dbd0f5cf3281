//! Python bindings: tokenizer, encoder inference and the zero-shot helpers.

use bsb_core::encoder::{self, load_checkpoint, EncoderModel, InputBatch, ModelConfig};
use bsb_core::eval::{cosine as cosine_sim, nearest_label, ZeroShotSpec};
use bsb_core::tokenizer::{self, Encoding, NormalizerConfig, Vocabulary, MASK};
use bsb_core::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Input(_) | Error::Validation(_) | Error::Format { .. } | Error::Json(_) | Error::Similarity { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Parameter count of a named preset (`tiny`, `mini`, `small`, `medium`, `base`).
#[pyfunction]
fn count_parameters(preset: &str) -> PyResult<u64> {
    ModelConfig::preset(preset)
        .map(|c| c.count_parameters())
        .ok_or_else(|| PyValueError::new_err(format!("unknown preset {preset:?}")))
}

/// Default Turkish-aware normalization.
#[pyfunction]
fn normalize(text: &str) -> String {
    tokenizer::normalize(text, &NormalizerConfig::default())
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    Ok(cosine_sim(&a, &b))
}

#[pyclass(name = "Tokenizer")]
struct PyTokenizer {
    inner: tokenizer::Tokenizer,
}

#[pymethods]
impl PyTokenizer {
    /// Loads a one-token-per-line vocabulary file.
    #[new]
    fn new(vocab_path: &str) -> PyResult<Self> {
        let vocab = Vocabulary::load(vocab_path).map_err(py_err)?;
        Ok(Self {
            inner: tokenizer::Tokenizer::new(vocab, NormalizerConfig::default()),
        })
    }

    #[staticmethod]
    fn from_tokens(tokens: Vec<String>) -> PyResult<Self> {
        let vocab = Vocabulary::with_specials(tokens).map_err(py_err)?;
        Ok(Self {
            inner: tokenizer::Tokenizer::new(vocab, NormalizerConfig::default()),
        })
    }

    #[pyo3(signature = (text, max_len = 128))]
    fn encode(&self, text: &str, max_len: usize) -> PyResult<Vec<u32>> {
        Ok(self.inner.encode(text, max_len, false).map_err(py_err)?.ids)
    }

    #[pyo3(signature = (text, max_len = 128))]
    fn tokenize(&self, text: &str, max_len: usize) -> PyResult<Vec<String>> {
        let enc = self.inner.encode(text, max_len, false).map_err(py_err)?;
        Ok(id_tokens(self.inner.vocab(), &enc.ids))
    }

    fn __len__(&self) -> usize {
        self.inner.vocab().len()
    }
}

fn id_tokens(vocab: &Vocabulary, ids: &[u32]) -> Vec<String> {
    ids.iter().map(|&i| vocab.token(i).unwrap_or("").to_owned()).collect()
}

/// Top-`k` token ids for each logits row, ties to the lower id.
fn top_k(rows: &[f64], vocab_size: usize, k: usize) -> Vec<Vec<(u32, f64)>> {
    rows.chunks(vocab_size)
        .map(|r| {
            let mut idx: Vec<usize> = (0..r.len()).collect();
            idx.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
            idx.into_iter().take(k).map(|i| (i as u32, r[i])).collect()
        })
        .collect()
}

#[pyclass(name = "Model")]
struct PyModel {
    inner: EncoderModel<f64>,
}

impl PyModel {
    /// Encodes `text` with a mask id wherever the literal `[MASK]` appears.
    fn encode_masked(&self, text: &str) -> Encoding {
        let vocab = self.inner.tokenizer.vocab();
        let mut ids = vec![vocab.cls_id()];
        for (i, segment) in text.split(MASK).enumerate() {
            if i > 0 {
                ids.push(vocab.mask_id());
            }
            ids.extend(self.inner.tokenizer.pieces(segment).into_iter().map(|(_, id)| id));
        }
        ids.truncate(self.inner.max_len - 1);
        ids.push(vocab.sep_id());
        let n = ids.len();
        Encoding {
            ids,
            attention_mask: vec![1; n],
            type_ids: vec![0; n],
            word_ids: vec![None; n],
        }
    }

    fn fill_mask_ids(&self, text: &str, k: usize) -> bsb_core::Result<Vec<Vec<(u32, f64)>>> {
        let enc = self.encode_masked(text);
        let mask = self.inner.tokenizer.vocab().mask_id();
        let queries: Vec<(usize, usize)> =
            enc.ids.iter().enumerate().filter(|(_, &id)| id == mask).map(|(i, _)| (0, i)).collect();
        if queries.is_empty() {
            return Err(Error::Input(format!("no {MASK} token in {text:?}")));
        }
        let input = InputBatch::from_encodings(std::slice::from_ref(&enc))?;
        let logits = self.inner.logits_at(&input, &queries)?;
        Ok(top_k(logits.data(), self.inner.config.vocab_size, k))
    }
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(checkpoint: &str, vocab_path: &str) -> PyResult<Self> {
        let (params, config) = load_checkpoint::<f64>(checkpoint).map_err(py_err)?;
        let vocab = Vocabulary::load(vocab_path).map_err(py_err)?;
        let tok = tokenizer::Tokenizer::new(vocab, NormalizerConfig::default());
        Ok(Self {
            inner: EncoderModel::new(config, params, tok).map_err(py_err)?,
        })
    }

    /// Freshly initialized preset sized to the given vocabulary.
    #[staticmethod]
    #[pyo3(signature = (preset, vocab_path, seed = 0))]
    fn init(preset: &str, vocab_path: &str, seed: u64) -> PyResult<Self> {
        let vocab = Vocabulary::load(vocab_path).map_err(py_err)?;
        let config = ModelConfig::preset(preset)
            .ok_or_else(|| PyValueError::new_err(format!("unknown preset {preset:?}")))?
            .with_vocab_size(vocab.len());
        let params = encoder::init_parameters::<f64>(&config, seed).map_err(py_err)?;
        let tok = tokenizer::Tokenizer::new(vocab, NormalizerConfig::default());
        Ok(Self {
            inner: EncoderModel::new(config, params, tok).map_err(py_err)?,
        })
    }

    #[getter]
    fn hidden_size(&self) -> usize {
        self.inner.config.hidden_size
    }

    fn num_parameters(&self) -> u64 {
        self.inner.params.total_elements()
    }

    /// Mean-pooled last-layer vectors.
    fn embed(&self, py: Python<'_>, texts: Vec<String>) -> PyResult<Vec<Vec<f64>>> {
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        py.detach(|| self.inner.embed_batch(&refs)).map_err(py_err)
    }

    /// For each `[MASK]` in `text`, the `k` most likely tokens with their logits.
    #[pyo3(signature = (text, k = 5))]
    fn fill_mask(&self, py: Python<'_>, text: &str, k: usize) -> PyResult<Vec<Vec<(String, f64)>>> {
        let rows = py.detach(|| self.fill_mask_ids(text, k)).map_err(py_err)?;
        let vocab = self.inner.tokenizer.vocab();
        Ok(rows
            .into_iter()
            .map(|r| r.into_iter().map(|(id, s)| (vocab.token(id).unwrap_or("").to_owned(), s)).collect())
            .collect())
    }

    /// Index of the label whose filled template is closest to each text.
    fn zero_shot(&self, py: Python<'_>, texts: Vec<String>, template: &str, labels: Vec<String>) -> PyResult<Vec<usize>> {
        let spec = ZeroShotSpec::new(template, labels).map_err(py_err)?;
        py.detach(|| {
            let refs = spec.references();
            let refs: Vec<&str> = refs.iter().map(String::as_str).collect();
            let anchors = self.inner.embed_batch(&refs)?;
            let texts: Vec<&str> = texts.iter().map(String::as_str).collect();
            let vecs = self.inner.embed_batch(&texts)?;
            Ok(vecs.iter().map(|v| nearest_label(&anchors, v)).collect())
        })
        .map_err(py_err)
    }

    /// Compares against a reference-activation JSON file; returns
    /// `(sentence, logits_max_abs, embedding_max_abs, passed)` tuples.
    fn check_parity(&self, references: &str) -> PyResult<Vec<(String, f64, f64, bool)>> {
        let refs = encoder::load_references(references).map_err(py_err)?;
        let results = encoder::check_parity(&self.inner, &refs).map_err(py_err)?;
        Ok(results
            .into_iter()
            .map(|r| {
                let ok = r.passed();
                (r.sentence, r.logits_max_abs, r.embedding_max_abs, ok)
            })
            .collect())
    }
}

#[pymodule]
fn bsb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(count_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_class::<PyTokenizer>()?;
    m.add_class::<PyModel>()?;
    Ok(())
}
