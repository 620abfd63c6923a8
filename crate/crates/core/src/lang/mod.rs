//! Language front-ends.
//!
//! A language model turns a raw utterance into a flat list of [`Token`]s in a
//! format shared by every language. Downstream stages (bag-of-words scoring,
//! value extraction, key-phrase matching) only ever look at tokens, so adding
//! a language means adding a [`LanguageModel`] implementation and registering
//! it in a [`LanguageModels`] table.

mod english;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub use english::EnglishModel;

/// Longest utterance accepted by [`LanguageModel::tokenize`], in bytes.
pub const MAX_UTTERANCE_BYTES: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("utterance is empty")]
    EmptyInput,
    #[error("utterance is {0} bytes, limit is {MAX_UTTERANCE_BYTES}")]
    OversizeInput(usize),
    #[error("no language model registered for {0:?}")]
    UnknownLanguage(String),
}

/// One token of an utterance.
///
/// `span` holds byte offsets `(start, end)` into the raw text, so
/// `&raw[span.0..span.1] == surface`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
    pub span: (usize, usize),
    pub is_stopword: bool,
    pub is_punct: bool,
}

impl Token {
    pub fn len(&self) -> usize {
        self.span.1 - self.span.0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageModelDescriptor {
    pub language_code: String,
    pub name: String,
}

/// Per-token annotation slot. The shipped models leave it empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenTags {
    pub part_of_speech: Option<String>,
    pub entity: Option<String>,
}

pub trait LanguageModel: Send + Sync {
    fn descriptor(&self) -> &LanguageModelDescriptor;

    fn tokenize(&self, text: &str) -> Result<Vec<Token>, LangError>;

    fn stopwords(&self) -> &HashSet<String>;

    /// Part-of-speech / named-entity tagging. Baseline returns empty tags.
    fn tag(&self, tokens: &[Token]) -> Vec<TokenTags> {
        vec![TokenTags::default(); tokens.len()]
    }
}

/// Case-folds, NFC-normalizes and strips surrounding punctuation.
///
/// Interior punctuation survives (`"don't"`), as does a leading minus sign on
/// a number (`"-5"`). The function is idempotent.
pub fn normalize(text: &str) -> String {
    let folded: String = text.nfc().collect::<String>().to_lowercase().nfc().collect();
    let trimmed = trim_punct(&folded);
    trimmed.to_string()
}

fn trim_punct(s: &str) -> &str {
    let end = s
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, c)| i + c.len_utf8());
    let Some(end) = end else {
        return "";
    };
    let s = &s[..end];
    let start = s.find(|c: char| c.is_alphanumeric()).unwrap_or(0);
    if start > 0 && s[..start].ends_with('-') && s[start..].starts_with(|c: char| c.is_ascii_digit()) {
        return &s[start - 1..];
    }
    &s[start..]
}

/// Registry of language models keyed by language code.
#[derive(Clone, Default)]
pub struct LanguageModels {
    models: HashMap<String, Arc<dyn LanguageModel>>,
}

impl LanguageModels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Table with the shipped English model registered under `"en"`.
    pub fn with_defaults() -> Self {
        let mut models = Self::new();
        models.register(Arc::new(EnglishModel::new()));
        models
    }

    /// Registers a model; a model with the same language code is replaced.
    pub fn register(&mut self, model: Arc<dyn LanguageModel>) {
        let code = model.descriptor().language_code.clone();
        self.models.insert(code, model);
    }

    pub fn get(&self, language_code: &str) -> Result<Arc<dyn LanguageModel>, LangError> {
        self.models
            .get(language_code)
            .cloned()
            .ok_or_else(|| LangError::UnknownLanguage(language_code.to_string()))
    }

    pub fn stopwords(&self, language_code: &str) -> Result<HashSet<String>, LangError> {
        Ok(self.get(language_code)?.stopwords().clone())
    }

    pub fn descriptors(&self) -> Vec<LanguageModelDescriptor> {
        let mut out: Vec<_> = self.models.values().map(|m| m.descriptor().clone()).collect();
        out.sort_by(|a, b| a.language_code.cmp(&b.language_code));
        out
    }
}

/// Parses the stopword file format: one word per line, `#` starts a comment.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(normalize)
        .filter(|w| !w.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("Home"), "home");
        assert_eq!(normalize("16th"), "16th");
        assert_eq!(normalize("don't"), "don't");
        assert_eq!(normalize("\"light.\""), "light");
        assert_eq!(normalize("-5"), "-5");
        assert_eq!(normalize("--x"), "x");
        assert_eq!(normalize(","), "");
    }

    #[test]
    fn stopword_file_format() {
        let set = parse_stopwords("# header\nThe\n\n a # trailing\n");
        assert_eq!(set.len(), 2);
        assert!(set.contains("the"));
        assert!(set.contains("a"));
    }

    #[test]
    fn english_registered_by_default() {
        let models = LanguageModels::with_defaults();
        let en = models.stopwords("en").unwrap();
        for w in ["the", "a", "in", "to", "of", "on"] {
            assert!(en.contains(w), "missing {w}");
        }
        assert!(!en.contains("temperature"));
        assert_eq!(
            models.stopwords("xx").unwrap_err(),
            LangError::UnknownLanguage("xx".into())
        );
        assert_eq!(models.descriptors()[0].language_code, "en");
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,24}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn normalize_is_idempotent_ascii(s in "[ -~]{0,24}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }
    }
}
