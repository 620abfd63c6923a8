//! The assistant's HTTP service: chat, app registration, a read/write proxy
//! to the home agent, and a server-sent event stream for consoles.

mod api;
mod events;
pub mod scenarios;
mod stack;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::broadcast;
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

pub use api::{router, ChatRequest, ChatResponse};
pub use events::Event;
pub use stack::{echo_app, serve_echo_app, Stack, StackConfig};

use crate::bus::BusError;
use crate::clock::{Clock, SystemClock};
use crate::dialog::{Engine, EngineConfig, EngineError};
use crate::embedding::{EmbeddingError, EmbeddingStore};
use crate::fixtures;
use crate::registry::{Registry, RegistryError, SharedRegistry};

pub const DEFAULT_LISTEN_PORT: u16 = 8080;

#[derive(Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Directory of app descriptors; in-memory when absent.
    pub apps_dir: Option<PathBuf>,
    /// Word vectors in text format; the bundled toy table when absent.
    pub embeddings: Option<PathBuf>,
    pub engine: EngineConfig,
    pub bus: Option<SocketAddr>,
    pub agent_url: Option<String>,
    pub transcript: Option<PathBuf>,
    pub clock: Arc<dyn Clock>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], DEFAULT_LISTEN_PORT)),
            apps_dir: None,
            embeddings: None,
            engine: EngineConfig::default(),
            bus: None,
            agent_url: None,
            transcript: None,
            clock: Arc::new(SystemClock),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("{0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything the request handlers share.
pub struct ServiceState {
    pub engine: Arc<Engine>,
    pub registry: SharedRegistry,
    pub agent_url: Option<String>,
    pub bus: Option<SocketAddr>,
    pub http: reqwest::Client,
    pub events: broadcast::Sender<Event>,
}

impl ServiceState {
    pub fn new(config: &ServiceConfig, registry: SharedRegistry) -> Result<Self, ServiceError> {
        let store = match &config.embeddings {
            Some(path) => EmbeddingStore::load(path)?,
            None => fixtures::toy_embeddings(),
        };
        let mut engine = Engine::new(registry.clone(), Arc::new(store), config.engine.clone())?
            .with_clock(config.clock.clone());
        if let Some(path) = &config.transcript {
            engine = engine.with_transcript(path)?;
        }
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(5))
            .build()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        let (events, _) = broadcast::channel(256);
        Ok(Self {
            engine: Arc::new(engine),
            registry,
            agent_url: config.agent_url.as_ref().map(|u| u.trim_end_matches('/').to_string()),
            bus: config.bus,
            http,
            events,
        })
    }
}

pub fn open_registry(config: &ServiceConfig) -> Result<SharedRegistry, ServiceError> {
    let registry = match &config.apps_dir {
        Some(dir) => Registry::open(dir)?,
        None => Registry::in_memory(),
    };
    Ok(SharedRegistry::new(registry))
}

pub struct ServiceHandle {
    pub state: Arc<ServiceState>,
    addr: SocketAddr,
    cancel: CancellationToken,
    tasks: Vec<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// True while the HTTP server and the bus listener are still running.
    pub fn is_running(&self) -> bool {
        self.tasks.iter().all(|t| !t.is_finished())
    }

    pub async fn wait(&mut self) {
        if let Some(server) = self.tasks.first_mut() {
            let _ = server.await;
        }
    }

    pub async fn shutdown(mut self) {
        self.cancel.cancel();
        for task in self.tasks.drain(..) {
            let _ = task.await;
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.cancel.cancel();
    }
}

/// Validates the configuration, opens the registry and starts serving.
pub async fn serve(config: ServiceConfig) -> Result<ServiceHandle, ServiceError> {
    config.engine.validate()?;
    let registry = open_registry(&config)?;
    serve_with(config, registry).await
}

pub async fn serve_with(config: ServiceConfig, registry: SharedRegistry) -> Result<ServiceHandle, ServiceError> {
    let state = Arc::new(ServiceState::new(&config, registry)?);
    let listener = TcpListener::bind(config.listen).await?;
    let addr = listener.local_addr()?;
    let cancel = CancellationToken::new();
    let app = router(state.clone());
    let token = cancel.clone();
    let mut tasks = vec![tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(token.cancelled_owned()).await {
            tracing::error!(error = %e, "service http server failed");
        }
    })];
    if let Some(bus) = config.bus {
        tasks.push(tokio::spawn(events::forward_bus(bus, state.events.clone(), cancel.clone())));
    }
    tracing::info!(%addr, "assistant service listening");
    Ok(ServiceHandle { state, addr, cancel, tasks })
}
