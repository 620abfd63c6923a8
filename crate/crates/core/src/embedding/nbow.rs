use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingStore};
use crate::lang::Token;

/// Normalized bag of words: distinct in-vocabulary words with weights that
/// sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBowDoc {
    words: Vec<String>,
    weights: Vec<f64>,
}

impl NBowDoc {
    /// Builds a document from raw (word, mass) pairs. Repeated words are
    /// merged and the masses renormalized.
    pub fn from_counts<I, S>(counts: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut words = Vec::new();
        let mut mass = Vec::new();
        for (word, m) in counts {
            if !(m > 0.0 && m.is_finite()) {
                continue;
            }
            let word = word.into();
            match index.get(&word) {
                Some(&i) => mass[i] += m,
                None => {
                    index.insert(word.clone(), words.len());
                    words.push(word);
                    mass.push(m);
                }
            }
        }
        let total: f64 = mass.iter().sum();
        if words.is_empty() || total <= 0.0 {
            return Err(EmbeddingError::AllWordsDropped);
        }
        let weights = mass.into_iter().map(|m| m / total).collect();
        Ok(Self { words, weights })
    }

    /// Uniform document over the given words (duplicates count twice).
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self, EmbeddingError> {
        Self::from_counts(words.iter().map(|w| (w.as_ref().to_string(), 1.0)))
    }

    /// Bag of words for a token list: punctuation, out-of-vocabulary words
    /// and (optionally) stopwords are dropped before counting.
    pub fn from_tokens(
        tokens: &[Token],
        store: &EmbeddingStore,
        drop_stopwords: bool,
    ) -> Result<Self, EmbeddingError> {
        Self::from_counts(
            tokens
                .iter()
                .filter(|t| !t.is_punct)
                .filter(|t| !(drop_stopwords && t.is_stopword))
                .filter(|t| store.contains(&t.normalized))
                .map(|t| (t.normalized.clone(), 1.0)),
        )
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.words.iter().map(String::as_str).zip(self.weights.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{EnglishModel, LanguageModel};

    fn toy() -> EmbeddingStore {
        EmbeddingStore::parse(include_str!("../../fixtures/embeddings/toy.txt")).unwrap()
    }

    #[test]
    fn count_normalization() {
        let store = EmbeddingStore::from_vectors(1, [("hello", vec![0.0]), ("world", vec![1.0])]).unwrap();
        let tokens = EnglishModel::new().tokenize("hello hello world").unwrap();
        let doc = NBowDoc::from_tokens(&tokens, &store, true).unwrap();
        assert_eq!(doc.words(), ["hello", "world"]);
        assert!((doc.weights()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((doc.weights()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_out_of_vocabulary() {
        let tokens = EnglishModel::new().tokenize("flibber jabber").unwrap();
        assert!(matches!(
            NBowDoc::from_tokens(&tokens, &toy(), true),
            Err(EmbeddingError::AllWordsDropped)
        ));
    }

    #[test]
    fn stopwords_dropped_from_motivating_sentence() {
        let tokens = EnglishModel::new()
            .tokenize("Obama speaks to the media in Illinois")
            .unwrap();
        let doc = NBowDoc::from_tokens(&tokens, &toy(), true).unwrap();
        assert_eq!(doc.words(), ["obama", "speaks", "media", "illinois"]);
        for w in doc.weights() {
            assert!((w - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let doc = NBowDoc::from_counts([("a", 1.0), ("b", 2.0), ("a", 4.0), ("c", 0.0)]).unwrap();
        assert_eq!(doc.len(), 2);
        assert!((doc.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(doc.weights().iter().all(|&w| w > 0.0));
    }
}
