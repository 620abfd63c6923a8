use std::collections::HashSet;

use unicode_segmentation::UnicodeSegmentation;

use super::{
    normalize, parse_stopwords, LangError, LanguageModel, LanguageModelDescriptor, Token,
    MAX_UTTERANCE_BYTES,
};

const STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");

/// Rule-based English model: Unicode word boundaries plus punctuation
/// splitting, with a static stopword list.
pub struct EnglishModel {
    descriptor: LanguageModelDescriptor,
    stopwords: HashSet<String>,
}

impl EnglishModel {
    pub fn new() -> Self {
        Self {
            descriptor: LanguageModelDescriptor {
                language_code: "en".into(),
                name: "English (rule-based)".into(),
            },
            stopwords: parse_stopwords(STOPWORDS_EN),
        }
    }
}

impl Default for EnglishModel {
    fn default() -> Self {
        Self::new()
    }
}

impl LanguageModel for EnglishModel {
    fn descriptor(&self) -> &LanguageModelDescriptor {
        &self.descriptor
    }

    fn tokenize(&self, text: &str) -> Result<Vec<Token>, LangError> {
        if text.len() > MAX_UTTERANCE_BYTES {
            return Err(LangError::OversizeInput(text.len()));
        }
        if text.trim().is_empty() {
            return Err(LangError::EmptyInput);
        }

        let mut spans: Vec<(usize, usize)> = Vec::new();
        for (start, segment) in text.split_word_bound_indices() {
            if segment.chars().all(char::is_whitespace) {
                continue;
            }
            if segment.chars().any(char::is_alphanumeric) {
                spans.push((start, start + segment.len()));
            } else {
                // Runs of symbols come back as one segment only sometimes;
                // emit one token per character so "," and "." always stand alone.
                for (offset, c) in segment.char_indices() {
                    if !c.is_whitespace() {
                        spans.push((start + offset, start + offset + c.len_utf8()));
                    }
                }
            }
        }

        // Glue a minus sign onto the number right behind it ("-5").
        let mut merged: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
        let mut i = 0;
        while i < spans.len() {
            let (start, end) = spans[i];
            let is_minus = &text[start..end] == "-";
            let at_word_start = start == 0
                || text[..start]
                    .chars()
                    .next_back()
                    .is_some_and(char::is_whitespace);
            if is_minus && at_word_start && i + 1 < spans.len() {
                let (next_start, next_end) = spans[i + 1];
                if next_start == end
                    && text[next_start..next_end]
                        .chars()
                        .next()
                        .is_some_and(|c| c.is_ascii_digit())
                {
                    merged.push((start, next_end));
                    i += 2;
                    continue;
                }
            }
            merged.push((start, end));
            i += 1;
        }

        Ok(merged
            .into_iter()
            .map(|(start, end)| {
                let surface = &text[start..end];
                let is_punct = !surface.chars().any(char::is_alphanumeric);
                let normalized = if is_punct { String::new() } else { normalize(surface) };
                let is_stopword = !is_punct && self.stopwords.contains(&normalized);
                Token {
                    surface: surface.to_string(),
                    normalized,
                    span: (start, end),
                    is_stopword,
                    is_punct,
                }
            })
            .collect())
    }

    fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(text: &str) -> Vec<String> {
        EnglishModel::new()
            .tokenize(text)
            .unwrap()
            .into_iter()
            .map(|t| t.surface)
            .collect()
    }

    #[test]
    fn splits_comma_after_app_name() {
        assert_eq!(
            surfaces("Home, turn off the light"),
            ["Home", ",", "turn", "off", "the", "light"]
        );
    }

    #[test]
    fn keeps_numbers_and_ordinals() {
        assert_eq!(surfaces("Set up 5 degree"), ["Set", "up", "5", "degree"]);
        assert_eq!(
            surfaces("remind 16th of November."),
            ["remind", "16th", "of", "November", "."]
        );
        assert_eq!(surfaces("set -5 or 2.5"), ["set", "-5", "or", "2.5"]);
        assert_eq!(surfaces("a-5"), ["a", "-", "5"]);
    }

    #[test]
    fn interior_apostrophe_kept() {
        assert_eq!(surfaces("don't stop"), ["don't", "stop"]);
    }

    #[test]
    fn empty_and_oversize() {
        let en = EnglishModel::new();
        assert_eq!(en.tokenize("").unwrap_err(), LangError::EmptyInput);
        assert_eq!(en.tokenize(" \t\n").unwrap_err(), LangError::EmptyInput);
        let long = "a ".repeat(2049);
        assert_eq!(
            en.tokenize(&long).unwrap_err(),
            LangError::OversizeInput(long.len())
        );
    }

    #[test]
    fn flags() {
        let tokens = EnglishModel::new().tokenize("Home, turn on the lights").unwrap();
        assert!(tokens[1].is_punct);
        assert_eq!(tokens[0].normalized, "home");
        assert!(tokens[3].is_stopword); // "on"
        assert!(tokens[4].is_stopword); // "the"
        assert!(!tokens[5].is_stopword);
    }

    fn check_invariants(text: &str, tokens: &[Token]) -> Result<(), TestCaseError> {
        let mut prev_end = 0;
        let mut rebuilt = String::new();
        let mut covered = 0;
        for t in tokens {
            prop_assert!(t.span.0 >= prev_end && t.span.1 > t.span.0);
            prop_assert!(t.is_punct || !t.normalized.is_empty());
            prop_assert_eq!(&text[t.span.0..t.span.1], t.surface.as_str());
            rebuilt.push_str(&text[prev_end..t.span.0]);
            rebuilt.push_str(&t.surface);
            prev_end = t.span.1;
            covered += t.len();
        }
        rebuilt.push_str(&text[prev_end..]);
        prop_assert_eq!(rebuilt, text);
        prop_assert!(covered <= text.len());
        // Skipped gaps are whitespace only.
        let mut last = 0;
        for t in tokens {
            prop_assert!(text[last..t.span.0].chars().all(char::is_whitespace));
            last = t.span.1;
        }
        Ok(())
    }

    proptest! {
        #[test]
        fn token_invariants_hold(text in "\\PC{1,60}") {
            let en = EnglishModel::new();
            match en.tokenize(&text) {
                Ok(tokens) => {
                    check_invariants(&text, &tokens)?;
                    prop_assert_eq!(en.tokenize(&text).unwrap(), tokens);
                }
                Err(e) => prop_assert_eq!(e, LangError::EmptyInput),
            }
        }

        #[test]
        fn token_invariants_hold_ascii(text in "[ -~]{1,60}") {
            let en = EnglishModel::new();
            if let Ok(tokens) = en.tokenize(&text) {
                check_invariants(&text, &tokens)?;
            }
        }
    }
}
