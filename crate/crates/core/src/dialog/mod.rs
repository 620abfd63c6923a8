//! Intent resolution and slot-filling dialogs.

mod engine;
mod resolve;
mod transcript;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::Engine;
pub use resolve::{resolve, MatchedBy, Resolution, ResolvedIntent};
pub use transcript::{Direction, TranscriptEntry, TranscriptLog};

use crate::dispatch::CommandMessage;
use crate::lang::LangError;
use crate::registry::{DataType, IntentDescriptor, ParameterSpec};

pub const UNRECOGNIZED_TEXT: &str = "Sorry, I do not recognize your request.";
pub const ABORTED_TEXT: &str = "Sorry, I still could not understand the answer, so I dropped the request.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// A sample matches when its word mover's distance to the query is
    /// strictly below this value.
    pub threshold: f64,
    /// How many times a question is repeated after an unusable answer.
    pub max_reasks: u32,
    pub drop_stopwords: bool,
    pub language: String,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { threshold: 1.0, max_reasks: 2, drop_stopwords: true, language: "en".into() }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(EngineError::Config(format!(
                "threshold must be a positive finite number, got {}",
                self.threshold
            )));
        }
        if self.max_reasks < 1 {
            return Err(EngineError::Config("max_reasks must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error("transcript log: {0}")]
    Transcript(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value")]
pub enum SlotCanonical {
    Number(f64),
    Date(NaiveDate),
    String(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotValue {
    pub parameter: String,
    pub data_type: DataType,
    /// Exact text from the user's utterance; this is what gets dispatched.
    pub surface: String,
    pub canonical: SlotCanonical,
}

/// An intent waiting for answers to its obligatory questions.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingIntent {
    pub app_name: String,
    pub intent: IntentDescriptor,
    pub filled: Vec<SlotValue>,
    /// Head is the slot currently being asked for.
    pub pending: Vec<ParameterSpec>,
    pub reasks: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum SessionState {
    #[default]
    Idle,
    AwaitingSlot(PendingIntent),
}

#[derive(Debug, Clone, Default)]
pub struct DialogSession {
    pub id: String,
    pub state: SessionState,
    pub transcript: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyKind {
    Question,
    Result,
    Unrecognized,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub kind: ReplyKind,
    pub text: String,
    /// The command that was sent to the app, if one was.
    pub dispatched: Option<CommandMessage>,
}

impl Reply {
    fn new(kind: ReplyKind, text: impl Into<String>) -> Self {
        Self { kind, text: text.into(), dispatched: None }
    }
}
