use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::EmbeddingError;

/// Immutable word-vector table loaded from a word2vec text file.
///
/// Keys are case-folded at load time and lookups case-fold the query, so
/// `get("Obama")` and `get("obama")` return the same vector.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    /// Builds a store from in-memory vectors. Later duplicates win.
    pub fn from_vectors<I, S>(dimension: usize, vectors: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        if dimension == 0 {
            return Err(EmbeddingError::MalformedHeader("dimension must be positive".into()));
        }
        let mut map = HashMap::new();
        for (line, (word, v)) in vectors.into_iter().enumerate() {
            if v.len() != dimension {
                return Err(EmbeddingError::DimensionMismatch {
                    line: line + 1,
                    expected: dimension,
                    found: v.len(),
                });
            }
            map.insert(word.as_ref().to_lowercase(), v);
        }
        if map.is_empty() {
            return Err(EmbeddingError::EmptyVocabulary);
        }
        Ok(Self { dimension, vectors: map })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses word2vec text format: a `"COUNT DIM"` header, then one
    /// `"word v1 .. vDIM"` row per line.
    pub fn parse(text: &str) -> Result<Self, EmbeddingError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| EmbeddingError::MalformedHeader("missing header line".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [count, dim] = fields.as_slice() else {
            return Err(EmbeddingError::MalformedHeader(format!(
                "expected \"COUNT DIMENSION\", got {header:?}"
            )));
        };
        let declared: usize = count
            .parse()
            .map_err(|_| EmbeddingError::MalformedHeader(format!("bad count {count:?}")))?;
        let dimension: usize = dim
            .parse()
            .map_err(|_| EmbeddingError::MalformedHeader(format!("bad dimension {dim:?}")))?;
        if dimension == 0 {
            return Err(EmbeddingError::MalformedHeader("dimension must be positive".into()));
        }

        let mut vectors = HashMap::with_capacity(declared);
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap_or_default();
            let values = parts
                .map(|p| {
                    p.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| EmbeddingError::MalformedRow {
                            line: line_no,
                            reason: format!("not a finite number: {p:?}"),
                        })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if values.len() != dimension {
                return Err(EmbeddingError::DimensionMismatch {
                    line: line_no,
                    expected: dimension,
                    found: values.len(),
                });
            }
            vectors.insert(word.to_lowercase(), values);
        }
        if vectors.is_empty() {
            return Err(EmbeddingError::EmptyVocabulary);
        }
        if vectors.len() != declared {
            tracing::debug!(declared, loaded = vectors.len(), "embedding header count differs from rows");
        }
        Ok(Self { dimension, vectors })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        match self.vectors.get(word) {
            Some(v) => Some(v),
            None => self.vectors.get(&word.to_lowercase()).map(Vec::as_slice),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    /// Euclidean distance between two in-vocabulary words.
    pub fn distance(&self, a: &str, b: &str) -> Option<f64> {
        Some(euclidean(self.get(a)?, self.get(b)?))
    }

    /// Returns a copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dimension: self.dimension,
            vectors: self
                .vectors
                .iter()
                .map(|(w, v)| (w.clone(), v.iter().map(|x| x * factor).collect()))
                .collect(),
        }
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_valid_file() {
        let store = EmbeddingStore::parse("2 2\na 0 0\nb 3 4\n").unwrap();
        assert_eq!(store.dimension(), 2);
        assert_eq!(store.len(), 2);
        assert_eq!(store.distance("a", "B"), Some(5.0));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            EmbeddingStore::parse("1 3\na 1 2\n"),
            Err(EmbeddingError::DimensionMismatch { line: 2, expected: 3, found: 2 })
        ));
    }

    #[test]
    fn header_and_vocab_errors() {
        assert!(matches!(
            EmbeddingStore::parse(""),
            Err(EmbeddingError::MalformedHeader(_))
        ));
        assert!(matches!(
            EmbeddingStore::parse("two 2\n"),
            Err(EmbeddingError::MalformedHeader(_))
        ));
        assert!(matches!(
            EmbeddingStore::parse("0 2\n"),
            Err(EmbeddingError::EmptyVocabulary)
        ));
        assert!(matches!(
            EmbeddingStore::parse("1 2\na 1 x\n"),
            Err(EmbeddingError::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_words_last_wins() {
        let store = EmbeddingStore::parse("2 1\nWord 1\nword 7\n").unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.get("WORD"), Some(&[7.0][..]));
    }
}
