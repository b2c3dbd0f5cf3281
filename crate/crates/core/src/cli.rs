//! `bsb` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::encoder::checkpoint::parse_header;
use crate::encoder::{init_parameters, load_checkpoint, save_checkpoint, EncoderModel, ModelConfig, PRESET_NAMES};
use crate::error::Error;
use crate::eval::reference::{mask_reference, throughput_reference, zero_shot_reference};
use crate::eval::{
    bench_csv, bench_vectorize, embed_sentences, load_dataset, load_texts, mask_eval, probe_eval, synthetic_sentences,
    synthetic_vocab, zero_shot_eval, EvalReport, ProbeSpec, ReportRow, ZeroShotSpec,
};
use crate::pretrain::{train_from, write_loss_curve, TrainingConfig};
use crate::tensor::Float;
use crate::tokenizer::{
    build_vocab, charlen_filter, corpus_filter, NormalizerConfig, Tokenizer, Vocabulary, MASK_EVAL_MAX_CHARS,
    MASK_EVAL_MIN_CHARS,
};

pub const OUT_ENV: &str = "BSB_OUT";
pub const DEFAULT_OUT: &str = "bsb-out";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Numeric {
    F32,
    #[default]
    F64,
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct CommonArgs {
    /// Named model size: tiny, mini, small, medium or base.
    #[arg(long)]
    pub preset: Option<String>,
    /// Model config JSON (BERT field names).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Vocabulary file, one token per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Input data file(s).
    #[arg(long)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; falls back to $BSB_OUT, then ./bsb-out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Numeric::F64)]
    pub numeric: Numeric,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Learn a WordPiece vocabulary from corpus lines.
    BuildVocab {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 32_000)]
        vocab_size: usize,
        #[arg(long, default_value_t = 2)]
        min_frequency: u64,
    },
    /// Masked-language-model pretraining.
    Pretrain {
        #[command(flatten)]
        common: CommonArgs,
        /// Training config JSON; missing fields take defaults.
        #[arg(long)]
        train_config: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Top-1 / top-5 masked token prediction.
    EvalMask {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 5)]
        k_masks: usize,
        #[arg(long, default_value_t = MASK_EVAL_MIN_CHARS)]
        min_chars: usize,
        #[arg(long, default_value_t = MASK_EVAL_MAX_CHARS)]
        max_chars: usize,
    },
    /// Dense probe on frozen sentence vectors.
    EvalProbe {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
    },
    /// Template-similarity classification.
    EvalZeroshot {
        #[command(flatten)]
        common: CommonArgs,
        /// JSON {"template": ..., "labels": [...]}.
        #[arg(long)]
        labels: PathBuf,
    },
    /// Sentence vectorization throughput across model sizes.
    BenchVectorize {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated presets.
        #[arg(long, default_value = "tiny,mini,small,medium,base")]
        models: String,
        #[arg(long, default_value_t = 1000)]
        sentences: usize,
        #[arg(long, default_value_t = 4)]
        words: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// Print the parameter count of a model config.
    CountParams {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print a checkpoint header summary.
    InspectCheckpoint {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::BuildVocab { .. } => "build-vocab",
            Command::Pretrain { .. } => "pretrain",
            Command::EvalMask { .. } => "eval-mask",
            Command::EvalProbe { .. } => "eval-probe",
            Command::EvalZeroshot { .. } => "eval-zeroshot",
            Command::BenchVectorize { .. } => "bench-vectorize",
            Command::CountParams { .. } => "count-params",
            Command::InspectCheckpoint { .. } => "inspect-checkpoint",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::BuildVocab { common, .. }
            | Command::Pretrain { common, .. }
            | Command::EvalMask { common, .. }
            | Command::EvalProbe { common, .. }
            | Command::EvalZeroshot { common, .. }
            | Command::BenchVectorize { common, .. }
            | Command::CountParams { common }
            | Command::InspectCheckpoint { common } => common,
        }
    }

    pub fn common_mut(&mut self) -> &mut CommonArgs {
        match self {
            Command::BuildVocab { common, .. }
            | Command::Pretrain { common, .. }
            | Command::EvalMask { common, .. }
            | Command::EvalProbe { common, .. }
            | Command::EvalZeroshot { common, .. }
            | Command::BenchVectorize { common, .. }
            | Command::CountParams { common }
            | Command::InspectCheckpoint { common } => common,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bsb", version, about = "Small BERT encoders: pretraining, evaluation and benchmarks")]
#[command(args_conflicts_with_subcommands = true, arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// Re-run the command recorded in a resolved config JSON.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// With --replay: output directory for the re-run.
    #[arg(long, requires = "replay")]
    pub out: Option<PathBuf>,
    /// With --replay: override the recorded thread count.
    #[arg(long, requires = "replay")]
    pub threads: Option<usize>,
    /// With --replay: override the recorded numeric mode.
    #[arg(long, value_enum, requires = "replay")]
    pub numeric: Option<Numeric>,
}

/// Everything needed to repeat a run, written into its output directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub command: Command,
    pub model_config: Option<ModelConfig>,
    pub training_config: Option<TrainingConfig>,
    pub probe_spec: Option<ProbeSpec>,
    pub zero_shot_spec: Option<ZeroShotSpec>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}\n\nRun `bsb --help` for usage.");
            1
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (command, replayed) = match (cli.command, cli.replay) {
        (Some(c), None) => (c, None),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let resolved: ResolvedConfig = serde_json::from_str(&text).map_err(Error::from)?;
            let mut cmd = resolved.command.clone();
            let common = cmd.common_mut();
            if cli.out.is_some() {
                common.out = cli.out;
            }
            if cli.threads.is_some() {
                common.threads = cli.threads;
            }
            if let Some(n) = cli.numeric {
                common.numeric = n;
            }
            (cmd, Some(resolved))
        }
        _ => return Err(usage("give a subcommand or --replay")),
    };
    let threads = command.common().threads;
    if threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| usage(format!("thread pool: {e}")))?;
    pool.install(|| match command.common().numeric {
        Numeric::F64 => execute::<f64>(&command, replayed.as_ref()),
        Numeric::F32 => execute::<f32>(&command, replayed.as_ref()),
    })
}

fn out_dir(common: &CommonArgs) -> CliResult<PathBuf> {
    let dir = common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn require_path<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    let p = p.as_deref().ok_or_else(|| usage(format!("{flag} is required")))?;
    if !p.exists() {
        return Err(usage(format!("{flag}: {} does not exist", p.display())));
    }
    Ok(p)
}

fn one_data(common: &CommonArgs) -> CliResult<&Path> {
    match common.data.as_slice() {
        [p] if p.exists() => Ok(p),
        [p] => Err(usage(format!("--data: {} does not exist", p.display()))),
        [] => Err(usage("--data is required")),
        _ => Err(usage("exactly one --data file expected")),
    }
}

/// Model config from `--config`, `--preset` or the recorded config of a
/// replay, in that order.
fn model_config(common: &CommonArgs, replayed: Option<&ResolvedConfig>) -> CliResult<Option<ModelConfig>> {
    if let Some(c) = replayed.and_then(|r| r.model_config.clone()) {
        return Ok(Some(c));
    }
    match (&common.config, &common.preset) {
        (Some(_), Some(_)) => Err(usage("--config and --preset are mutually exclusive")),
        (Some(path), None) => {
            let path = require_path(&Some(path.clone()), "--config")?.to_path_buf();
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let cfg: ModelConfig = serde_json::from_str(&text).map_err(Error::from)?;
            cfg.validate()?;
            Ok(Some(cfg))
        }
        (None, Some(name)) => ModelConfig::preset(name).map(Some).ok_or_else(|| {
            usage(format!("unknown preset {name:?}; expected one of {}", PRESET_NAMES.join(", ")))
        }),
        (None, None) => Ok(None),
    }
}

fn load_vocab(common: &CommonArgs) -> CliResult<Vocabulary> {
    let path = require_path(&common.vocab, "--vocab")?;
    Ok(Vocabulary::load(path)?)
}

/// Checkpoint weights, or fresh weights from the model config and seed.
fn load_model<T: Float>(common: &CommonArgs, replayed: Option<&ResolvedConfig>) -> CliResult<EncoderModel<T>> {
    let vocab = load_vocab(common)?;
    let tokenizer = Tokenizer::new(vocab.clone(), NormalizerConfig::default());
    if common.checkpoint.is_some() {
        let path = require_path(&common.checkpoint, "--checkpoint")?;
        let (params, cfg) = load_checkpoint::<T>(path)?;
        return Ok(EncoderModel::new(cfg, params, tokenizer)?);
    }
    let cfg = model_config(common, replayed)?
        .ok_or_else(|| usage("one of --checkpoint, --preset or --config is required"))?
        .with_vocab_size(vocab.len());
    let params = init_parameters(&cfg, common.seed)?;
    Ok(EncoderModel::new(cfg, params, tokenizer)?)
}

fn row(model: &str, task: &str, dataset: &str, metric: &str, value: f64, std: f64, wall_s: f64, n: usize) -> ReportRow {
    ReportRow {
        model: model.into(),
        task: task.into(),
        dataset: dataset.into(),
        metric: metric.into(),
        value,
        std,
        wall_s,
        n,
    }
}

fn model_label(common: &CommonArgs) -> String {
    if let Some(p) = &common.checkpoint {
        return p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    common
        .preset
        .clone()
        .or_else(|| {
            common
                .config
                .as_ref()
                .and_then(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        })
        .unwrap_or_else(|| "model".into())
}

fn dataset_label(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn finish(dir: &Path, resolved: &ResolvedConfig, report: EvalReport) -> CliResult<()> {
    report.validate()?;
    write_json(&dir.join(RESOLVED_CONFIG_FILE), resolved)?;
    report.write_csv(dir.join(REPORT_CSV))?;
    report.write_json(dir.join(REPORT_JSON))?;
    Ok(())
}

fn resolved(command: &Command) -> ResolvedConfig {
    ResolvedConfig {
        command: command.clone(),
        model_config: None,
        training_config: None,
        probe_spec: None,
        zero_shot_spec: None,
    }
}

fn execute<T: Float>(command: &Command, replayed: Option<&ResolvedConfig>) -> CliResult<()> {
    let common = command.common();
    let mut res = resolved(command);
    match command {
        Command::CountParams { .. } => {
            let cfg = model_config(common, replayed)?.ok_or_else(|| usage("--preset or --config is required"))?;
            println!("{}", cfg.count_parameters());
        }
        Command::InspectCheckpoint { .. } => {
            let path = require_path(&common.checkpoint, "--checkpoint")?;
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let header = parse_header(&bytes)?;
            let (params, cfg) = crate::encoder::checkpoint::checkpoint_from_bytes::<f32>(&bytes)?;
            let summary = serde_json::json!({
                "config": cfg,
                "aliases": header.aliases,
                "tensors": header.tensors.len(),
                "elements": params.total_elements(),
                "count_parameters": cfg.count_parameters(),
            });
            println!("{}", serde_json::to_string_pretty(&summary).map_err(Error::from)?);
        }
        Command::BuildVocab {
            vocab_size,
            min_frequency,
            ..
        } => {
            let texts = load_texts(one_data(common)?)?;
            let start = std::time::Instant::now();
            let vocab = build_vocab(&texts, *vocab_size, *min_frequency)?;
            let dir = out_dir(common)?;
            vocab.save(dir.join("vocab.txt"))?;
            let report = EvalReport::new(vec![row(
                "-",
                "build-vocab",
                &dataset_label(one_data(common)?),
                "vocab_size",
                vocab.len() as f64,
                0.0,
                start.elapsed().as_secs_f64(),
                texts.len(),
            )]);
            finish(&dir, &res, report)?;
        }
        Command::Pretrain {
            train_config,
            max_steps,
            learning_rate,
            ..
        } => {
            let data = one_data(common)?;
            let vocab = load_vocab(common)?;
            let cfg = model_config(common, replayed)?
                .ok_or_else(|| usage("--preset or --config is required"))?
                .with_vocab_size(vocab.len());
            let mut tc = match (replayed.and_then(|r| r.training_config.clone()), train_config) {
                (Some(tc), _) => tc,
                (None, Some(p)) => {
                    let p = require_path(&Some(p.clone()), "--train-config")?.to_path_buf();
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str(&text).map_err(Error::from)?
                }
                (None, None) => TrainingConfig::default(),
            };
            if replayed.is_none() {
                tc.seed = common.seed;
                if let Some(b) = common.batch_size {
                    tc.batch_size = b;
                }
                if let Some(s) = max_steps {
                    tc.max_steps = *s;
                }
                if let Some(lr) = learning_rate {
                    tc.learning_rate = *lr;
                }
            }
            tc.validate()?;
            let corpus: Vec<String> = corpus_filter(load_texts(data)?).collect();
            let tokenizer = Tokenizer::new(vocab, NormalizerConfig::default());
            let params = init_parameters::<T>(&cfg, tc.seed)?;
            let start = std::time::Instant::now();
            let outcome = train_from(params, &corpus, &tokenizer, &cfg, &tc, |_| {})?;
            let wall = start.elapsed().as_secs_f64();
            let dir = out_dir(common)?;
            save_checkpoint(&outcome.params, &cfg, dir.join("checkpoint.bsb"))?;
            write_loss_curve(dir.join("loss.csv"), &outcome.curve)?;
            let first = outcome.curve.first().map_or(f64::NAN, |p| p.loss);
            let last = outcome.curve.last().map_or(f64::NAN, |p| p.loss);
            let name = model_label(common);
            let ds = dataset_label(data);
            let report = EvalReport::new(vec![
                row(&name, "pretrain", &ds, "initial_loss", first, 0.0, wall, corpus.len()),
                row(&name, "pretrain", &ds, "final_loss", last, 0.0, wall, corpus.len()),
            ]);
            res.model_config = Some(cfg);
            res.training_config = Some(tc);
            finish(&dir, &res, report)?;
        }
        Command::EvalMask {
            k_masks,
            min_chars,
            max_chars,
            ..
        } => {
            if min_chars > max_chars {
                return Err(usage("--min-chars exceeds --max-chars"));
            }
            let data = one_data(common)?;
            let model = load_model::<T>(common, replayed)?;
            let texts: Vec<String> = charlen_filter(load_texts(data)?, *min_chars, *max_chars).collect();
            let r = mask_eval(&model, &texts, *k_masks, common.seed, common.batch_size.unwrap_or(32))?;
            let name = model_label(common);
            let ds = dataset_label(data);
            let report = EvalReport::new(vec![
                row(&name, "mask", &ds, "top1_accuracy", r.top1, 0.0, r.wall_s, r.positions),
                row(&name, "mask", &ds, "top5_accuracy", r.top5, 0.0, r.wall_s, r.positions),
            ])
            .with_reference(mask_reference());
            res.model_config = Some(model.config.clone());
            finish(&out_dir(common)?, &res, report)?;
        }
        Command::EvalProbe { repetitions, epochs, .. } => {
            let data = one_data(common)?;
            let model = load_model::<T>(common, replayed)?;
            let ds = load_dataset(data)?;
            let spec = match replayed.and_then(|r| r.probe_spec.clone()) {
                Some(s) => s,
                None => ProbeSpec {
                    repetitions: *repetitions,
                    epochs: *epochs,
                    seed: common.seed,
                    ..Default::default()
                },
            };
            let emb = embed_sentences(&model, &ds.texts, common.batch_size.unwrap_or(32))?;
            let start = std::time::Instant::now();
            let r = probe_eval(&emb.vectors, &ds.labels, ds.classes.len(), &spec)?;
            let wall = emb.wall_s + start.elapsed().as_secs_f64();
            let report = EvalReport::new(vec![row(
                &model_label(common),
                "probe",
                &dataset_label(data),
                "mean_accuracy",
                r.mean,
                r.std,
                wall,
                ds.len(),
            )]);
            res.model_config = Some(model.config.clone());
            res.probe_spec = Some(spec);
            finish(&out_dir(common)?, &res, report)?;
        }
        Command::EvalZeroshot { labels, .. } => {
            let data = one_data(common)?;
            let spec: ZeroShotSpec = match replayed.and_then(|r| r.zero_shot_spec.clone()) {
                Some(s) => s,
                None => {
                    let p = require_path(&Some(labels.clone()), "--labels")?.to_path_buf();
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str(&text).map_err(Error::from)?
                }
            };
            spec.validate()?;
            let model = load_model::<T>(common, replayed)?;
            let ds = load_dataset(data)?;
            // dataset classes are matched to spec labels by name when possible
            let gold: Vec<usize> = ds
                .labels
                .iter()
                .map(|&l| spec.labels.iter().position(|s| *s == ds.classes[l]).unwrap_or(l))
                .collect();
            let r = zero_shot_eval(&model, &ds.texts, &gold, &spec, common.batch_size.unwrap_or(32))?;
            let report = EvalReport::new(vec![row(
                &model_label(common),
                "zeroshot",
                &dataset_label(data),
                "accuracy",
                r.accuracy,
                0.0,
                r.wall_s,
                ds.len(),
            )])
            .with_reference(zero_shot_reference());
            res.model_config = Some(model.config.clone());
            res.zero_shot_spec = Some(spec);
            finish(&out_dir(common)?, &res, report)?;
        }
        Command::BenchVectorize {
            models,
            sentences,
            words,
            repeats,
            ..
        } => {
            let specs = models
                .split(',')
                .map(|n| {
                    let n = n.trim();
                    ModelConfig::preset(n)
                        .map(|c| (n.to_string(), c))
                        .ok_or_else(|| usage(format!("unknown preset {n:?} in --models")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let vocab = match &common.vocab {
                Some(_) => load_vocab(common)?,
                None => synthetic_vocab(32_000)?,
            };
            let texts = synthetic_sentences(&vocab, *sentences, *words, common.seed);
            let rows = bench_vectorize(&specs, &vocab, &texts, common.batch_size.unwrap_or(32), *repeats, common.seed)?;
            let dir = out_dir(common)?;
            let csv_path = dir.join("bench.csv");
            std::fs::write(&csv_path, bench_csv(&rows)).map_err(|e| Error::io(&csv_path, e))?;
            let report_rows = rows
                .iter()
                .flat_map(|r| {
                    [
                        row(&r.model, "vectorize", "synthetic", "parameters", r.parameters as f64, 0.0, r.median_s, r.sentences),
                        row(&r.model, "vectorize", "synthetic", "flops_per_token", r.flops_per_token, 0.0, r.median_s, r.sentences),
                        row(&r.model, "vectorize", "synthetic", "sentences_per_s", r.sentences_per_s, 0.0, r.median_s, r.sentences),
                    ]
                })
                .collect();
            finish(&dir, &res, EvalReport::new(report_rows).with_reference(throughput_reference()))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_params_codes() {
        assert_eq!(dispatch(["bsb", "count-params", "--preset", "tiny"]), 0);
        assert_eq!(dispatch(["bsb", "count-params", "--preset", "nosuch"]), 1);
        assert_eq!(dispatch(["bsb", "count-params", "--bogus"]), 1);
        assert_eq!(dispatch(["bsb", "count-params"]), 1);
        assert_eq!(dispatch(["bsb", "nosuch"]), 1);
        assert_eq!(dispatch(["bsb", "--help"]), 0);
    }

    #[test]
    fn command_serializes_with_kebab_names() {
        let cli = Cli::try_parse_from(["bsb", "count-params", "--preset", "mini", "--seed", "4"]).unwrap();
        let cmd = cli.command.unwrap();
        let json = serde_json::to_string(&cmd).unwrap();
        assert!(json.contains("count-params"), "{json}");
        assert!(json.contains("\"seed\":4"));
        let back: Command = serde_json::from_str(&json).unwrap();
        assert_eq!(back.common().preset.as_deref(), Some("mini"));
    }
}
