mod common;

use bsb_core::encoder::checkpoint::checkpoint_from_bytes;
use bsb_core::encoder::parity::{check_parity, parse_references};
use bsb_core::encoder::{forward, init_parameters, EncoderModel, InputBatch, Mode, ModelConfig, ParameterStore};
use bsb_core::tokenizer::{NormalizerConfig, Tokenizer, Vocabulary};
use bsb_core::Error;

fn toy() -> (ModelConfig, ParameterStore<f64>, Tokenizer) {
    let words = ["ev", "okul", "kitap", "güzel", "büyük", "bir", "bu", "çok", "##ler", "##de", "."];
    let vocab = Vocabulary::with_specials(words).unwrap();
    let cfg = ModelConfig::toy(16, 4, 2, vocab.len()).without_dropout();
    let mut p = init_parameters::<f64>(&cfg, 21).unwrap();
    common::randomize(&mut p, 4, 0.3);
    (cfg, p, Tokenizer::new(vocab, NormalizerConfig::default()))
}

const SENTENCES: [&str; 3] = ["Bu ev çok güzel.", "bir kitap", "Büyük okullerde kitaplar"];

#[test]
fn library_forward_matches_scalar_oracle() {
    let (cfg, p, tok) = toy();
    let encs: Vec<_> = SENTENCES.iter().map(|s| tok.encode(s, 32, false).unwrap()).collect();
    let batch = InputBatch::from_encodings(&encs).unwrap();
    let out = forward(&p, &cfg, &batch, Mode::Eval).unwrap();
    let (t, h, v) = (batch.seq_len, cfg.hidden_size, cfg.vocab_size);
    for (s, enc) in encs.iter().enumerate() {
        let (hid, logits) = common::naive_forward(&p, &cfg, &enc.ids);
        for i in 0..enc.len() {
            for k in 0..h {
                let x = out.hidden.data()[(s * t + i) * h + k];
                assert!((x - hid[i][k]).abs() <= 1e-10, "hidden {s},{i},{k}");
            }
            for k in 0..v {
                let x = out.logits.data()[(s * t + i) * v + k];
                assert!((x - logits[i][k]).abs() <= 1e-10, "logit {s},{i},{k}");
            }
        }
    }
}

fn references(p: &ParameterStore<f64>, cfg: &ModelConfig, tok: &Tokenizer, tol: f64) -> String {
    let refs: Vec<_> = SENTENCES
        .iter()
        .map(|s| {
            let ids = tok.encode(s, 32, false).unwrap().ids;
            let (hid, logits) = common::naive_forward(p, cfg, &ids);
            serde_json::json!({
                "sentence": s,
                "logits_digest": common::logits_digest(&logits),
                "logits": logits,
                "embedding": common::mean_rows(&hid),
                "tolerance": tol,
            })
        })
        .collect();
    serde_json::to_string(&refs).unwrap()
}

#[test]
fn hand_written_checkpoint_passes_parity() {
    let (cfg, p, tok) = toy();
    let p32 = common::round_f32(&p);
    let bytes = common::write_checkpoint_bytes(&p, &cfg);
    let (loaded, cfg2) = checkpoint_from_bytes::<f64>(&bytes).unwrap();
    assert_eq!(cfg2, cfg);
    assert_eq!(loaded, p32);
    assert_eq!(loaded.total_elements(), cfg.count_parameters());

    let refs = parse_references(&references(&p32, &cfg, &tok, 1e-5)).unwrap();
    let model = EncoderModel::new(cfg2, loaded, tok).unwrap();
    let results = check_parity(&model, &refs).unwrap();
    assert_eq!(results.len(), 3);
    for r in &results {
        assert!(r.passed(), "{r:?}");
        assert!(r.logits_max_abs <= 1e-5);
    }

    let f32_model = model.cast::<f32>();
    for r in check_parity(&f32_model, &refs).unwrap() {
        assert!(r.logits_max_abs <= 1e-3, "{r:?}");
    }
}

#[test]
fn parity_detects_perturbed_weights() {
    let (cfg, p, tok) = toy();
    let refs = parse_references(&references(&p, &cfg, &tok, 1e-5)).unwrap();
    let mut q = p.clone();
    q.get_mut("mlm.decoder.bias").unwrap().data_mut()[6] += 1e-3;
    let model = EncoderModel::new(cfg, q, tok).unwrap();
    assert!(check_parity(&model, &refs).unwrap().iter().any(|r| !r.passed()));
}

#[test]
fn parity_rejects_mismatched_shapes() {
    let (cfg, p, tok) = toy();
    let text = references(&p, &cfg, &tok, 1e-5);
    let refs = parse_references(&text).unwrap();
    let bigger = cfg.clone().with_vocab_size(cfg.vocab_size + 1);
    let params = init_parameters::<f64>(&bigger, 0).unwrap();
    let model = EncoderModel::new(bigger, params, tok).unwrap();
    assert!(matches!(check_parity(&model, &refs), Err(Error::Validation(_))));
}
