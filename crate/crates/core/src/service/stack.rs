use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::http::StatusCode;
use axum::routing::post;
use axum::Router;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use super::{serve_with, ServiceConfig, ServiceError, ServiceHandle};
use crate::bus::{Broker, BrokerConfig, DEFAULT_RETRY_INTERVAL};
use crate::clock::{Clock, SystemClock};
use crate::dialog::EngineConfig;
use crate::dispatch::decode;
use crate::fixtures;
use crate::home::{self, HomeAgentConfig, HomeAgentHandle};
use crate::registry::{Registry, SharedRegistry};
use crate::sim::{self, SimConfig, SimHandle};

fn loopback() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 0))
}

/// A stand-in app that accepts any command and confirms it.
pub fn echo_app() -> Router {
    Router::new().route(
        "/command",
        post(|body: Bytes| async move {
            match decode(&body) {
                Ok(command) => {
                    let params: Vec<String> = command.params.iter().map(|(k, v)| format!("{k}: {v}")).collect();
                    (StatusCode::OK, format!("{} accepted ({}).", command.intent, params.join(", ")))
                }
                Err(e) => (StatusCode::BAD_REQUEST, e.to_string()),
            }
        }),
    )
}

pub async fn serve_echo_app(bind: SocketAddr) -> std::io::Result<(SocketAddr, JoinHandle<()>)> {
    let listener = TcpListener::bind(bind).await?;
    let addr = listener.local_addr()?;
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, echo_app()).await;
    });
    Ok((addr, task))
}

#[derive(Clone)]
pub struct StackConfig {
    /// Where the journal and transcript go.
    pub dir: PathBuf,
    pub sim: SimConfig,
    pub bus_retry: Duration,
    pub engine: EngineConfig,
    pub clock: Arc<dyn Clock>,
}

impl StackConfig {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            sim: SimConfig::default(),
            bus_retry: DEFAULT_RETRY_INTERVAL,
            engine: EngineConfig::default(),
            clock: Arc::new(SystemClock),
        }
    }
}

/// Broker, home agent, device simulator, a Calendar stand-in and the
/// assistant service, all in one process on loopback ports.
pub struct Stack {
    pub broker: Broker,
    pub agent: HomeAgentHandle,
    pub sim: SimHandle,
    pub service: ServiceHandle,
    calendar: JoinHandle<()>,
}

impl Stack {
    pub async fn start(config: StackConfig) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(&config.dir)?;
        let broker = Broker::start(BrokerConfig {
            bind: loopback(),
            retry_interval: config.bus_retry,
            ..BrokerConfig::default()
        })
        .await?;
        let agent = home::serve(HomeAgentConfig {
            http_bind: loopback(),
            bus: Some(broker.local_addr()),
            journal: Some(config.dir.join("readings.jsonl")),
            ..HomeAgentConfig::default()
        })
        .await
        .map_err(|e| ServiceError::Config(format!("home agent: {e}")))?;
        let sim = sim::spawn(config.sim.clone(), broker.local_addr())
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        let (calendar_addr, calendar) = serve_echo_app(loopback()).await?;

        // The shipped descriptors point at the default ports; retarget them.
        let mut registry = Registry::in_memory();
        let mut home_app = fixtures::home_descriptor();
        home_app.url = agent.url();
        let mut calendar_app = fixtures::calendar_descriptor();
        calendar_app.url = format!("http://{calendar_addr}");
        registry.register(home_app)?;
        registry.register(calendar_app)?;

        let service = serve_with(
            ServiceConfig {
                listen: loopback(),
                engine: config.engine.clone(),
                bus: Some(broker.local_addr()),
                agent_url: Some(agent.url()),
                transcript: Some(config.dir.join("transcript.jsonl")),
                clock: config.clock.clone(),
                ..ServiceConfig::default()
            },
            SharedRegistry::new(registry),
        )
        .await?;
        Ok(Self { broker, agent, sim, service, calendar })
    }

    /// Waits until the agent holds the bus and has a first reading.
    pub async fn ready(&self, within: Duration) -> bool {
        tokio::time::timeout(within, async {
            while !(self.agent.agent.bus_connected() && self.agent.agent.latest_reading_ts().is_some()) {
                tokio::time::sleep(Duration::from_millis(20)).await;
            }
        })
        .await
        .is_ok()
    }

    /// Names of components whose task has stopped.
    pub fn stopped(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.broker.is_running() {
            out.push("broker");
        }
        if !self.agent.is_running() {
            out.push("home-agent");
        }
        if !self.sim.is_running() {
            out.push("device-sim");
        }
        if !self.service.is_running() {
            out.push("service");
        }
        if self.calendar.is_finished() {
            out.push("calendar");
        }
        out
    }

    pub async fn shutdown(self) {
        self.service.shutdown().await;
        self.sim.shutdown().await;
        self.agent.shutdown().await;
        self.broker.shutdown().await;
        self.calendar.abort();
    }
}
