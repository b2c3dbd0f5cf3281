//! Evaluation protocols: mask prediction, probe classification, zero-shot
//! classification and vectorization throughput, plus dataset and report IO.

pub mod bench;
pub mod dataset;
pub mod embed;
pub mod mask;
pub mod probe;
pub mod reference;
pub mod report;
pub mod zeroshot;

pub use bench::{bench_csv, bench_vectorize, median, synthetic_sentences, synthetic_vocab, BenchRow};
pub use dataset::{load_dataset, load_texts, LabeledDataset};
pub use embed::{embed_sentences, Embeddings, SentenceEncoder};
pub use mask::{mask_eval, rank_of, MaskEvalResult, MaskedExample, MaskedLanguageModel};
pub use probe::{mean_std, probe_eval, stratified_split, ProbeResult, ProbeSpec};
pub use report::{read_report_csv, EvalReport, ReferenceFigure, ReportRow};
pub use zeroshot::{cosine, nearest_label, zero_shot_eval, ZeroShotResult, ZeroShotSpec};
