use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 8] = ["model", "task", "dataset", "metric", "value", "std", "wall_s", "n"];

/// One line of an evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub task: String,
    pub dataset: String,
    pub metric: String,
    pub value: f64,
    pub std: f64,
    pub wall_s: f64,
    pub n: usize,
}

/// Published full-scale reference figure, carried in reports as context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFigure {
    pub model: String,
    pub task: String,
    pub dataset: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    /// Published full-scale reference figures. Documentation only; never
    /// compared against.
    pub published_reference: Vec<ReferenceFigure>,
}

impl EvalReport {
    pub fn new(rows: Vec<ReportRow>) -> Self {
        Self {
            rows,
            published_reference: Vec::new(),
        }
    }

    pub fn with_reference(mut self, figures: impl IntoIterator<Item = ReferenceFigure>) -> Self {
        self.published_reference.extend(figures);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            if r.metric.contains("accuracy") && !(0.0..=1.0).contains(&r.value) {
                return Err(Error::Validation(format!("accuracy {} outside [0, 1]", r.value)));
            }
            if !(r.std >= 0.0) {
                return Err(Error::Validation(format!("negative std {}", r.std)));
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.task.clone(),
                r.dataset.clone(),
                r.metric.clone(),
                format!("{:?}", r.value),
                format!("{:?}", r.std),
                format!("{:.6}", r.wall_s),
                r.n.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Reads a report CSV back.
pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64) -> ReportRow {
        ReportRow {
            model: "tiny".into(),
            task: "mask".into(),
            dataset: "news".into(),
            metric: "top1_accuracy".into(),
            value: v,
            std: 0.0,
            wall_s: 1.5,
            n: 10,
        }
    }

    #[test]
    fn csv_round_trip_keeps_values_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rep = EvalReport::new(vec![row(0.1 + 0.2), row(1.0 / 3.0)]);
        rep.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("model,task,dataset,metric,value,std,wall_s,n\n"));
        assert_eq!(read_report_csv(&p).unwrap(), rep.rows);
    }

    #[test]
    fn accuracy_range_checked() {
        assert!(EvalReport::new(vec![row(1.2)]).validate().is_err());
        assert!(EvalReport::new(vec![row(0.5)]).validate().is_ok());
    }
}
