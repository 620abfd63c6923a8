//! Word embeddings and word mover's distance.

mod nbow;
mod store;
mod transport;
mod wmd;

use thiserror::Error;

pub use nbow::NBowDoc;
pub use store::EmbeddingStore;
pub use transport::{solve_balanced, solve_transport, TransportPlan, MAX_DOC_WORDS};
pub use wmd::{wmd, wmd_lower_bound};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("malformed embedding header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: vector has {found} components, header says {expected}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("embedding file has no words")]
    EmptyVocabulary,
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no in-vocabulary words left after filtering")]
    AllWordsDropped,
    #[error("word {0:?} is not in the embedding vocabulary")]
    OutOfVocabulary(String),
    #[error("document has {words} distinct words, limit is {limit}")]
    SizeExceeded { words: usize, limit: usize },
}

/// Convenience: builds a bag of words for `tokens` and loads nothing else.
pub fn to_nbow(
    tokens: &[crate::lang::Token],
    store: &EmbeddingStore,
    drop_stopwords: bool,
) -> Result<NBowDoc, EmbeddingError> {
    NBowDoc::from_tokens(tokens, store, drop_stopwords)
}
