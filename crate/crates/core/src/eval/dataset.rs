use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Texts with class ids into `classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub texts: Vec<String>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
    /// Where the data came from, e.g. a file path or "synthetic".
    pub provenance: String,
}

impl LabeledDataset {
    pub fn new(texts: Vec<String>, labels: Vec<usize>, classes: Vec<String>, provenance: impl Into<String>) -> Result<Self> {
        let d = Self {
            texts,
            labels,
            classes,
            provenance: provenance.into(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.texts.len() != self.labels.len() {
            return Err(Error::Input(format!(
                "{} texts but {} labels",
                self.texts.len(),
                self.labels.len()
            )));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.classes.len()) {
            return Err(Error::Input(format!("class id {l} but only {} classes", self.classes.len())));
        }
        if let Some(i) = self.texts.iter().position(|t| t.trim().is_empty()) {
            return Err(Error::Input(format!("example {i} has empty text")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.classes.json"))
}

/// Reads a `text,label` CSV. Labels are class ids or class names. Class
/// names come from `<stem>.classes.json` (a JSON array) when present,
/// otherwise from the sorted distinct name labels, or `"0".."k"` for ids.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Input(format!("{}: missing column {name:?}", path.display())))
    };
    let (ti, li) = (col("text")?, col("label")?);
    let mut texts = Vec::new();
    let mut raw = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        texts.push(rec.get(ti).unwrap_or_default().to_owned());
        raw.push(rec.get(li).unwrap_or_default().trim().to_owned());
    }

    let sidecar = sidecar_path(path);
    let named: Option<Vec<String>> = if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        Some(serde_json::from_str(&text)?)
    } else {
        None
    };
    let numeric = raw.iter().all(|r| r.parse::<usize>().is_ok());
    let (labels, classes) = match (numeric, named) {
        (true, Some(classes)) => (raw.iter().map(|r| r.parse().expect("checked")).collect(), classes),
        (true, None) => {
            let ids: Vec<usize> = raw.iter().map(|r| r.parse().expect("checked")).collect();
            let k = ids.iter().max().map_or(0, |m| m + 1);
            (ids, (0..k).map(|i| i.to_string()).collect())
        }
        (false, classes) => {
            let classes = classes.unwrap_or_else(|| raw.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect());
            let labels = raw
                .iter()
                .map(|r| {
                    classes
                        .iter()
                        .position(|c| c == r)
                        .ok_or_else(|| Error::Input(format!("unknown class label {r:?}")))
                })
                .collect::<Result<_>>()?;
            (labels, classes)
        }
    };
    LabeledDataset::new(texts, labels, classes, path.display().to_string())
}

/// Texts from a CSV with a `text` column, or one per line otherwise.
pub fn load_texts(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let ti = reader
            .headers()?
            .iter()
            .position(|h| h.trim() == "text")
            .ok_or_else(|| Error::Input(format!("{}: missing column \"text\"", path.display())))?;
        let mut out = Vec::new();
        for rec in reader.records() {
            out.push(rec?.get(ti).unwrap_or_default().to_owned());
        }
        Ok(out)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(text.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect())
    }
}
