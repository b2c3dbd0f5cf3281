use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnicodeForm {
    None,
    #[default]
    Nfc,
    Nfd,
    Nfkc,
    Nfkd,
}

impl UnicodeForm {
    fn apply(self, s: &str) -> String {
        match self {
            UnicodeForm::None => s.to_owned(),
            UnicodeForm::Nfc => s.nfc().collect(),
            UnicodeForm::Nfd => s.nfd().collect(),
            UnicodeForm::Nfkc => s.nfkc().collect(),
            UnicodeForm::Nfkd => s.nfkd().collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizerConfig {
    pub lowercase: bool,
    /// Map `İ → i` and `I → ı` before lowercasing.
    pub turkish_casefold: bool,
    pub strip_accents: bool,
    pub form: UnicodeForm,
}

impl Default for NormalizerConfig {
    /// Uncased Turkish pipeline.
    fn default() -> Self {
        Self {
            lowercase: true,
            turkish_casefold: true,
            strip_accents: false,
            form: UnicodeForm::Nfc,
        }
    }
}

impl NormalizerConfig {
    /// Plain lowercasing without Turkish dotted/dotless handling.
    pub fn generic_uncased() -> Self {
        Self {
            turkish_casefold: false,
            ..Self::default()
        }
    }

    pub fn normalize(&self, text: &str) -> String {
        normalize(text, self)
    }
}

fn lowercase(text: &str, turkish: bool) -> String {
    if !turkish {
        return text.to_lowercase();
    }
    let mapped: String = text
        .chars()
        .map(|c| match c {
            'İ' => 'i',
            'I' => 'ı',
            other => other,
        })
        .collect();
    mapped.to_lowercase()
}

/// Lowercases (Turkish-aware when enabled), applies the Unicode form,
/// optionally strips combining marks, and collapses whitespace runs to a
/// single space.
pub fn normalize(text: &str, cfg: &NormalizerConfig) -> String {
    let mut s = cfg.form.apply(text);
    if cfg.lowercase {
        s = lowercase(&s, cfg.turkish_casefold);
    }
    if cfg.strip_accents {
        s = s.nfd().filter(|&c| !is_combining_mark(c)).collect();
    }
    s = cfg.form.apply(&s);
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// [`normalize`] over raw bytes, rejecting invalid UTF-8.
pub fn normalize_bytes(bytes: &[u8], cfg: &NormalizerConfig) -> Result<String> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Input(format!("invalid UTF-8 at byte {}", e.valid_up_to())))?;
    Ok(normalize(text, cfg))
}
