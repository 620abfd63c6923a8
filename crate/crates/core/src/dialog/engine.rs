use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use super::{
    resolve, DialogSession, Direction, EngineConfig, EngineError, PendingIntent, Reply, ReplyKind,
    Resolution, SessionState, SlotCanonical, SlotValue, TranscriptEntry, TranscriptLog,
    ABORTED_TEXT, UNRECOGNIZED_TEXT,
};
use crate::clock::{Clock, SystemClock};
use crate::dispatch::{CommandMessage, DispatchStatus, Dispatcher, HttpDispatcher};
use crate::embedding::EmbeddingStore;
use crate::extract::{capture_string, extract_date, extract_number, extract_selected, TokenMask};
use crate::lang::{LanguageModel, LanguageModels, Token};
use crate::registry::{DataType, IntentDescriptor, ParameterSpec, SharedRegistry};

/// Order in which missing obligatory slots are asked: typed values first so
/// a free-text answer never has to compete with a date or a number.
fn ask_rank(data_type: DataType) -> u8 {
    match data_type {
        DataType::Date => 0,
        DataType::Number => 1,
        DataType::String => 2,
    }
}

/// The conversational engine. Cheap to share behind an `Arc`; each session is
/// processed one message at a time while distinct sessions run concurrently.
pub struct Engine {
    registry: SharedRegistry,
    store: Arc<EmbeddingStore>,
    lang: Arc<dyn LanguageModel>,
    config: EngineConfig,
    clock: Arc<dyn Clock>,
    dispatcher: Arc<dyn Dispatcher>,
    transcript: Option<TranscriptLog>,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<DialogSession>>>>,
}

impl Engine {
    pub fn new(
        registry: SharedRegistry,
        store: Arc<EmbeddingStore>,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let lang = LanguageModels::with_defaults().get(&config.language)?;
        Ok(Self {
            registry,
            store,
            lang,
            config,
            clock: Arc::new(SystemClock),
            dispatcher: Arc::new(HttpDispatcher::default()),
            transcript: None,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_language_models(mut self, models: &LanguageModels) -> Result<Self, EngineError> {
        self.lang = models.get(&self.config.language)?;
        Ok(self)
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_dispatcher(mut self, dispatcher: Arc<dyn Dispatcher>) -> Self {
        self.dispatcher = dispatcher;
        self
    }

    pub fn with_transcript(mut self, path: impl AsRef<Path>) -> Result<Self, EngineError> {
        self.transcript = Some(TranscriptLog::open(path)?);
        Ok(self)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn registry(&self) -> &SharedRegistry {
        &self.registry
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }

    pub fn language(&self) -> &dyn LanguageModel {
        self.lang.as_ref()
    }

    fn session(&self, id: &str) -> Arc<tokio::sync::Mutex<DialogSession>> {
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        sessions
            .entry(id.to_string())
            .or_insert_with(|| {
                Arc::new(tokio::sync::Mutex::new(DialogSession { id: id.to_string(), ..Default::default() }))
            })
            .clone()
    }

    /// Current state of a session (Idle for unknown ids).
    pub async fn session_state(&self, id: &str) -> SessionState {
        self.session(id).lock().await.state.clone()
    }

    pub async fn session_transcript(&self, id: &str) -> Vec<TranscriptEntry> {
        self.session(id).lock().await.transcript.clone()
    }

    fn log(&self, session: &mut DialogSession, direction: Direction, text: &str) {
        let entry = TranscriptEntry {
            ts: self.clock.now(),
            session: session.id.clone(),
            direction,
            text: text.to_string(),
        };
        if let Some(log) = &self.transcript {
            if let Err(e) = log.append(&entry) {
                tracing::warn!(error = %e, "transcript append failed");
            }
        }
        session.transcript.push(entry);
    }

    /// Processes one user message in the given session.
    pub async fn handle_message(&self, session_id: &str, text: &str) -> Result<Reply, EngineError> {
        let tokens = self.lang.tokenize(text)?;
        let session = self.session(session_id);
        let mut session = session.lock().await;
        self.log(&mut session, Direction::User, text);

        let state = std::mem::take(&mut session.state);
        let (reply, next) = match state {
            SessionState::Idle => self.on_request(text, &tokens).await,
            SessionState::AwaitingSlot(pending) => self.on_answer(text, &tokens, pending).await,
        };
        session.state = next;
        self.log(&mut session, Direction::Dpa, &reply.text);
        Ok(reply)
    }

    async fn on_request(&self, raw: &str, tokens: &[Token]) -> (Reply, SessionState) {
        let snapshot = self.registry.snapshot();
        let resolved = match resolve(tokens, &snapshot, &self.config, &self.store, self.lang.as_ref()) {
            Resolution::Resolved(r) => r,
            Resolution::Unrecognized => {
                return (Reply::new(ReplyKind::Unrecognized, UNRECOGNIZED_TEXT), SessionState::Idle)
            }
        };
        let Some(intent) = snapshot
            .get(&resolved.app_name)
            .ok()
            .and_then(|app| app.intent(&resolved.intent_name))
            .cloned()
        else {
            return (Reply::new(ReplyKind::Unrecognized, UNRECOGNIZED_TEXT), SessionState::Idle);
        };
        tracing::debug!(app = %resolved.app_name, intent = %intent.name, matched_by = ?resolved.matched_by, "intent resolved");

        let has = |t: DataType| intent.parameters.iter().any(|p| p.data_type == t);
        let values = extract_selected(
            tokens,
            raw,
            self.clock.today(),
            has(DataType::Date),
            has(DataType::Number),
        );
        let consumed: TokenMask = resolved.consumed.difference(&values.claimed).copied().collect();

        let mut filled = Vec::new();
        let mut missing = Vec::new();
        for param in &intent.parameters {
            let slot = match param.data_type {
                DataType::Date => values.date.as_ref().map(|d| SlotValue {
                    parameter: param.name.clone(),
                    data_type: DataType::Date,
                    surface: d.surface.clone(),
                    canonical: SlotCanonical::Date(d.canonical),
                }),
                DataType::Number => values.number.as_ref().map(|n| SlotValue {
                    parameter: param.name.clone(),
                    data_type: DataType::Number,
                    surface: n.surface.clone(),
                    canonical: SlotCanonical::Number(n.value),
                }),
                DataType::String => capture_string(
                    tokens,
                    raw,
                    &values.claimed,
                    &consumed,
                    param.compiled_pattern().as_ref(),
                )
                .map(|s| string_slot(param, s.surface)),
            };
            match slot {
                Some(slot) => filled.push(slot),
                None if param.obligatory => missing.push(param.clone()),
                None => {}
            }
        }
        missing.sort_by_key(|p| ask_rank(p.data_type));

        let pending = PendingIntent {
            app_name: resolved.app_name,
            intent,
            filled,
            pending: missing,
            reasks: 0,
        };
        self.advance(pending).await
    }

    async fn on_answer(
        &self,
        raw: &str,
        tokens: &[Token],
        mut pending: PendingIntent,
    ) -> (Reply, SessionState) {
        let slot = pending.pending[0].clone();
        let value = match slot.data_type {
            DataType::Date => extract_date(tokens, raw, self.clock.today()).map(|d| SlotValue {
                parameter: slot.name.clone(),
                data_type: DataType::Date,
                surface: d.surface,
                canonical: SlotCanonical::Date(d.canonical),
            }),
            DataType::Number => extract_number(tokens, &TokenMask::new()).map(|n| SlotValue {
                parameter: slot.name.clone(),
                data_type: DataType::Number,
                surface: n.surface,
                canonical: SlotCanonical::Number(n.value),
            }),
            DataType::String => {
                // Values still owed to other pending slots are not part of the text.
                let still = |t: DataType| pending.pending[1..].iter().any(|p| p.data_type == t);
                let claims = extract_selected(
                    tokens,
                    raw,
                    self.clock.today(),
                    still(DataType::Date),
                    still(DataType::Number),
                )
                .claimed;
                capture_string(tokens, raw, &claims, &TokenMask::new(), slot.compiled_pattern().as_ref())
                    .map(|s| string_slot(&slot, s.surface))
            }
        };

        match value {
            Some(value) => {
                pending.filled.push(value);
                pending.pending.remove(0);
                pending.reasks = 0;
                self.advance(pending).await
            }
            None if pending.reasks < self.config.max_reasks => {
                pending.reasks += 1;
                let question = Reply::new(ReplyKind::Question, slot.question.clone());
                (question, SessionState::AwaitingSlot(pending))
            }
            None => (Reply::new(ReplyKind::Aborted, ABORTED_TEXT), SessionState::Idle),
        }
    }

    /// Asks the next pending question, or dispatches once nothing is missing.
    async fn advance(&self, pending: PendingIntent) -> (Reply, SessionState) {
        if let Some(next) = pending.pending.first() {
            let question = Reply::new(ReplyKind::Question, next.question.clone());
            return (question, SessionState::AwaitingSlot(pending));
        }
        (self.dispatch(&pending.app_name, &pending.intent, &pending.filled).await, SessionState::Idle)
    }

    async fn dispatch(&self, app_name: &str, intent: &IntentDescriptor, filled: &[SlotValue]) -> Reply {
        let mut command = CommandMessage::new(app_name, &intent.name);
        for param in &intent.parameters {
            if let Some(slot) = filled.iter().find(|s| s.parameter == param.name) {
                command.params.push((param.name.clone(), slot.surface.clone()));
            }
        }
        debug_assert!(intent
            .parameters
            .iter()
            .filter(|p| p.obligatory)
            .all(|p| command.param(&p.name).is_some()));

        let snapshot = self.registry.snapshot();
        let Ok(app) = snapshot.get(app_name) else {
            return Reply::new(ReplyKind::Result, format!("The {app_name} app is no longer registered."));
        };
        let result = self.dispatcher.dispatch(app, &command).await;
        tracing::info!(app = %app_name, intent = %intent.name, latency_ms = result.latency.as_millis() as u64, status = ?result.status, "command dispatched");
        let text = match result.status {
            DispatchStatus::Ok { body } => body,
            DispatchStatus::AppError { code, body } => {
                format!("The {app_name} app reported an error ({code}): {body}")
            }
            DispatchStatus::Unreachable { reason } => {
                format!("Could not reach the {app_name} app: {reason}")
            }
        };
        Reply { kind: ReplyKind::Result, text, dispatched: Some(command) }
    }
}

fn string_slot(param: &ParameterSpec, surface: String) -> SlotValue {
    SlotValue {
        parameter: param.name.clone(),
        data_type: DataType::String,
        canonical: SlotCanonical::String(surface.clone()),
        surface,
    }
}
