mod common;

use common::{bsb, bsb_env, cli_fixture, report_values};

fn s(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn count_params_prints_the_tiny_count() {
    let r = bsb(&["count-params", "--preset", "tiny"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout.trim(), "4607360");
    assert_eq!(bsb(&["count-params", "--preset", "base"]).stdout.trim(), "110650880");
}

#[test]
fn usage_errors_exit_one() {
    let r = bsb(&["count-params", "--preset", "nosuch"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("unknown preset"));
    let r = bsb(&["count-params", "--no-such-flag"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.to_lowercase().contains("usage"));
    assert_eq!(bsb(&["frobnicate"]).code, 1);
    assert_eq!(bsb(&["eval-mask"]).code, 1);
    assert_eq!(bsb(&["--version"]).code, 0);
}

#[test]
fn zero_shot_with_six_news_labels_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let f = cli_fixture(dir.path());
    let out = dir.path().join("zs");
    let r = bsb(&[
        "eval-zeroshot", "--preset", "tiny", "--vocab", s(&f.vocab), "--data", s(&f.dataset),
        "--labels", s(&f.labels), "--out", s(&out), "--seed", "2",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows = bsb_core::eval::read_report_csv(out.join("report.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].metric, "accuracy");
    assert_eq!(rows[0].n, 36);
    assert!((0.0..=1.0).contains(&rows[0].value));
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["zero_shot_spec"]["labels"].as_array().unwrap().len(), 6);
    let json = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(json.contains("published_reference"));
}

#[test]
fn pretrain_then_evaluate_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let f = cli_fixture(dir.path());
    let out = dir.path().join("pt");
    let r = bsb(&[
        "pretrain", "--config", s(&f.model_config), "--vocab", s(&f.vocab), "--data", s(&f.corpus),
        "--out", s(&out), "--batch-size", "4", "--max-steps", "3", "--learning-rate", "1e-3",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for f in ["checkpoint.bsb", "loss.csv", "report.csv", "report.json", "resolved_config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let ckpt = out.join("checkpoint.bsb");
    let r = bsb(&["inspect-checkpoint", "--checkpoint", s(&ckpt)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("mlm.decoder.weight"));

    let probe_out = dir.path().join("probe");
    let r = bsb(&[
        "eval-probe", "--checkpoint", s(&ckpt), "--vocab", s(&f.vocab), "--data", s(&f.dataset),
        "--out", s(&probe_out), "--repetitions", "2", "--epochs", "3",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(report_values(&probe_out).len(), 1);

    let mask_out = dir.path().join("mask");
    let r = bsb(&[
        "eval-mask", "--checkpoint", s(&ckpt), "--vocab", s(&f.vocab), "--data", s(&f.corpus),
        "--out", s(&mask_out), "--min-chars", "10",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(report_values(&mask_out).len(), 2);
}

#[test]
fn corrupt_checkpoint_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bsb");
    std::fs::write(&bad, [1u8, 2, 3]).unwrap();
    let r = bsb(&["inspect-checkpoint", "--checkpoint", s(&bad)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("byte"));
}

#[test]
fn output_directory_falls_back_to_env() {
    let dir = tempfile::tempdir().unwrap();
    let f = cli_fixture(dir.path());
    let env_out = dir.path().join("from-env");
    let r = bsb_env(
        &["build-vocab", "--data", s(&f.corpus), "--vocab-size", "60", "--min-frequency", "1"],
        &[("BSB_OUT", &env_out)],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = bsb_core::tokenizer::Vocabulary::load(env_out.join("vocab.txt")).unwrap();
    assert!(v.len() >= 60);
    assert!(env_out.join("resolved_config.json").exists());
}

#[test]
fn replay_reproduces_report_values() {
    let dir = tempfile::tempdir().unwrap();
    let f = cli_fixture(dir.path());
    let first = dir.path().join("a");
    let r = bsb(&[
        "eval-probe", "--config", s(&f.model_config), "--vocab", s(&f.vocab), "--data", s(&f.dataset),
        "--out", s(&first), "--repetitions", "2", "--epochs", "3", "--seed", "9", "--numeric", "f32",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let second = dir.path().join("b");
    let r = bsb(&[
        "--replay", s(&first.join("resolved_config.json")), "--out", s(&second), "--threads", "1", "--numeric", "f64",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let third = dir.path().join("c");
    let r = bsb(&["--replay", s(&second.join("resolved_config.json")), "--out", s(&third)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(report_values(&second), report_values(&third));
}
