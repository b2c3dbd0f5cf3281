//! Published full-scale figures. They need the original pretrained
//! checkpoints and private datasets, so reports carry them as context only.

use super::report::ReferenceFigure;

pub const BASE_NEWS_MASK_TOP1: f64 = 0.7954;
pub const BASE_NEWS_MASK_TOP5: f64 = 0.9108;
pub const BASE_SENTIMENT_ZERO_SHOT: f64 = 0.8216;
pub const BASE_NEWS_ZERO_SHOT: f64 = 0.3269;
/// Observed tiny-over-base vectorization speed ratio ("about 50 times").
pub const TINY_OVER_BASE_SPEEDUP: f64 = 50.0;

pub const SENTIMENT_TEMPLATE: &str = "Bu metnin içerdiği duygu çoğunlukla { }.";
pub const SENTIMENT_LABELS: [&str; 2] = ["olumlu", "olumsuz"];
pub const NEWS_TEMPLATE: &str = "Bu haberin içeriği çoğunlukla { } ile ilgilidir.";
pub const NEWS_LABELS: [&str; 6] = ["dunya", "ekonomi", "kultur-sanat", "magazin", "politika", "spor"];

fn fig(model: &str, task: &str, dataset: &str, metric: &str, value: f64) -> ReferenceFigure {
    ReferenceFigure {
        model: model.into(),
        task: task.into(),
        dataset: dataset.into(),
        metric: metric.into(),
        value,
    }
}

pub fn mask_reference() -> Vec<ReferenceFigure> {
    vec![
        fig("base", "mask", "news", "top1_accuracy", BASE_NEWS_MASK_TOP1),
        fig("base", "mask", "news", "top5_accuracy", BASE_NEWS_MASK_TOP5),
    ]
}

pub fn zero_shot_reference() -> Vec<ReferenceFigure> {
    vec![
        fig("base", "zeroshot", "sentiment", "accuracy", BASE_SENTIMENT_ZERO_SHOT),
        fig("base", "zeroshot", "news", "accuracy", BASE_NEWS_ZERO_SHOT),
    ]
}

pub fn throughput_reference() -> Vec<ReferenceFigure> {
    vec![fig("tiny/base", "vectorize", "-", "speedup", TINY_OVER_BASE_SPEEDUP)]
}
