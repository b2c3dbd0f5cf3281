//! Binary checkpoint format.
//!
//! Layout: an 8-byte little-endian header length `N`, `N` bytes of UTF-8 JSON,
//! then a blob of little-endian f32 values. The header maps each tensor name
//! to `{dtype, shape, offset, length}` (byte offsets into the blob) and also
//! carries `"config"` and `"aliases"`. The tied MLM decoder matrix is stored
//! once under the token-embedding name and listed in `"aliases"`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::config::ModelConfig;
use super::params::{ParameterStore, DECODER_WEIGHT_ALIAS, WORD_EMBEDDINGS};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

const CONFIG_KEY: &str = "config";
const ALIASES_KEY: &str = "aliases";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub length: u64,
}

/// Parsed header of a checkpoint file.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    pub aliases: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, TensorEntry>,
    /// Absolute file offset of the blob.
    pub data_start: u64,
}

fn format_err(offset: u64, reason: impl Into<String>) -> Error {
    Error::Format {
        offset,
        reason: reason.into(),
    }
}

/// Serializes `params` (as f32) and `config` into the checkpoint byte layout.
pub fn checkpoint_bytes<T: Float>(params: &ParameterStore<T>, config: &ModelConfig) -> Result<Vec<u8>> {
    config.validate()?;
    params.validate(config)?;
    let mut header = Map::new();
    header.insert(CONFIG_KEY.into(), serde_json::to_value(config)?);
    let mut aliases = Map::new();
    aliases.insert(DECODER_WEIGHT_ALIAS.into(), Value::String(WORD_EMBEDDINGS.into()));
    header.insert(ALIASES_KEY.into(), Value::Object(aliases));

    let mut blob = Vec::with_capacity(params.total_elements() as usize * 4);
    for (name, t) in params.iter() {
        let offset = blob.len() as u64;
        for &x in t.data() {
            blob.extend_from_slice(&(x.to_f64() as f32).to_le_bytes());
        }
        let entry = TensorEntry {
            dtype: "f32".into(),
            shape: t.shape().to_vec(),
            offset,
            length: blob.len() as u64 - offset,
        };
        header.insert(name.to_owned(), serde_json::to_value(entry)?);
    }
    let json = serde_json::to_vec(&Value::Object(header))?;
    let mut out = Vec::with_capacity(8 + json.len() + blob.len());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    Ok(out)
}

pub fn save_checkpoint<T: Float>(params: &ParameterStore<T>, config: &ModelConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = checkpoint_bytes(params, config)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parses and checks the header against the total file size.
pub fn parse_header(bytes: &[u8]) -> Result<CheckpointHeader> {
    if bytes.len() < 8 {
        return Err(format_err(bytes.len() as u64, "file shorter than the 8-byte header length"));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
    let data_start = 8u64
        .checked_add(n)
        .filter(|&end| end <= bytes.len() as u64)
        .ok_or_else(|| format_err(8, format!("header length {n} runs past end of file ({} bytes)", bytes.len())))?;
    let json: Value =
        serde_json::from_slice(&bytes[8..data_start as usize]).map_err(|e| format_err(8, format!("header JSON: {e}")))?;
    let Value::Object(mut map) = json else {
        return Err(format_err(8, "header is not a JSON object"));
    };
    let config: ModelConfig = match map.remove(CONFIG_KEY) {
        Some(v) => serde_json::from_value(v).map_err(|e| format_err(8, format!("config: {e}")))?,
        None => return Err(format_err(8, "header has no config")),
    };
    let aliases: BTreeMap<String, String> = match map.remove(ALIASES_KEY) {
        Some(v) => serde_json::from_value(v).map_err(|e| format_err(8, format!("aliases: {e}")))?,
        None => BTreeMap::new(),
    };
    let blob_len = bytes.len() as u64 - data_start;
    let mut tensors = BTreeMap::new();
    let mut covered = 0u64;
    for (name, v) in map {
        let entry: TensorEntry =
            serde_json::from_value(v).map_err(|e| format_err(8, format!("tensor {name}: {e}")))?;
        if entry.dtype != "f32" {
            return Err(format_err(8, format!("tensor {name}: unsupported dtype {}", entry.dtype)));
        }
        let elems: u64 = entry.shape.iter().map(|&d| d as u64).product();
        if entry.length != elems * 4 {
            return Err(format_err(
                8,
                format!("tensor {name}: length {} does not match shape {:?}", entry.length, entry.shape),
            ));
        }
        let end = entry.offset.saturating_add(entry.length);
        if end > blob_len {
            return Err(format_err(
                data_start + blob_len,
                format!("tensor {name} needs bytes up to {} but the blob has {blob_len}", end),
            ));
        }
        covered += entry.length;
        tensors.insert(name, entry);
    }
    if covered != blob_len {
        return Err(format_err(
            data_start + covered.min(blob_len),
            format!("blob holds {blob_len} bytes but tensors declare {covered}"),
        ));
    }
    Ok(CheckpointHeader {
        config,
        aliases,
        tensors,
        data_start,
    })
}

/// Decodes a checkpoint held in memory.
pub fn checkpoint_from_bytes<T: Float>(bytes: &[u8]) -> Result<(ParameterStore<T>, ModelConfig)> {
    let header = parse_header(bytes)?;
    for (alias, target) in &header.aliases {
        if !header.tensors.contains_key(target) {
            return Err(Error::Validation(format!("alias {alias} points at missing tensor {target}")));
        }
        if alias != DECODER_WEIGHT_ALIAS {
            return Err(Error::Validation(format!("unknown alias {alias}")));
        }
    }
    let mut store = ParameterStore::new();
    for (name, e) in &header.tensors {
        let start = (header.data_start + e.offset) as usize;
        let raw = &bytes[start..start + e.length as usize];
        let data: Vec<T> = raw
            .chunks_exact(4)
            .map(|c| T::from_f64(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect();
        store.insert(name.clone(), Tensor::new(e.shape.clone(), data)?);
    }
    header.config.validate()?;
    store.validate(&header.config)?;
    Ok((store, header.config))
}

pub fn load_checkpoint<T: Float>(path: impl AsRef<Path>) -> Result<(ParameterStore<T>, ModelConfig)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::params::init_parameters;

    fn toy() -> (ParameterStore<f32>, ModelConfig) {
        let cfg = ModelConfig::toy(8, 2, 1, 16);
        (init_parameters(&cfg, 3).unwrap(), cfg)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (p, cfg) = toy();
        let bytes = checkpoint_bytes(&p, &cfg).unwrap();
        let (q, cfg2) = checkpoint_from_bytes::<f32>(&bytes).unwrap();
        assert_eq!(cfg, cfg2);
        for (name, t) in p.iter() {
            let u = q.get(name).unwrap();
            assert!(t.data().iter().zip(u.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        assert_eq!(checkpoint_bytes(&q, &cfg2).unwrap(), bytes);
    }

    #[test]
    fn header_lists_alias_and_no_decoder_matrix() {
        let (p, cfg) = toy();
        let h = parse_header(&checkpoint_bytes(&p, &cfg).unwrap()).unwrap();
        assert_eq!(h.aliases[DECODER_WEIGHT_ALIAS], WORD_EMBEDDINGS);
        assert!(!h.tensors.contains_key(DECODER_WEIGHT_ALIAS));
        assert_eq!(h.tensors[WORD_EMBEDDINGS].shape, vec![16, 8]);
    }

    #[test]
    fn every_truncation_fails_with_format_error() {
        let (p, cfg) = toy();
        let bytes = checkpoint_bytes(&p, &cfg).unwrap();
        for cut in [1, 2, 5, 100] {
            let r = checkpoint_from_bytes::<f32>(&bytes[..bytes.len() - cut]);
            assert!(matches!(r, Err(Error::Format { .. })), "cut {cut}: {r:?}");
        }
        assert!(matches!(checkpoint_from_bytes::<f32>(&bytes[..4]), Err(Error::Format { offset: 4, .. })));
        assert!(matches!(checkpoint_from_bytes::<f32>(&bytes[..20]), Err(Error::Format { offset: 8, .. })));
    }

    #[test]
    fn shape_mismatch_is_validation_error() {
        let (p, mut cfg) = toy();
        let mut bytes = checkpoint_bytes(&p, &cfg).unwrap();
        // rewrite the header with a config claiming a larger intermediate size
        cfg.intermediate_size = 64;
        let h = parse_header(&bytes).unwrap();
        let mut map: Map<String, Value> = serde_json::from_slice(&bytes[8..h.data_start as usize]).unwrap();
        map.insert(CONFIG_KEY.into(), serde_json::to_value(&cfg).unwrap());
        let json = serde_json::to_vec(&map).unwrap();
        let blob = bytes.split_off(h.data_start as usize);
        let mut out = (json.len() as u64).to_le_bytes().to_vec();
        out.extend(json);
        out.extend(blob);
        assert!(matches!(checkpoint_from_bytes::<f32>(&out), Err(Error::Validation(_))));
    }

    #[test]
    fn file_round_trip() {
        let (p, cfg) = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&p, &cfg, &path).unwrap();
        let (q, _) = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(p, q);
        assert!(matches!(load_checkpoint::<f32>(dir.path().join("none")), Err(Error::Io { .. })));
    }
}
