use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

use super::{HomeAgent, HomeError, SynonymTable};
use crate::bus::{Backoff, BusClient, ClientOptions, COMMAND_NACK_TOPIC, SENSOR_TOPIC};
use crate::dispatch::decode;

pub const DEFAULT_HTTP_PORT: u16 = 7878;

#[derive(Debug, Clone)]
pub struct HomeAgentConfig {
    pub http_bind: SocketAddr,
    /// Broker to connect to; without one, commands fail with 503.
    pub bus: Option<SocketAddr>,
    pub journal: Option<PathBuf>,
    /// Device/synonym table; the built-in table when absent.
    pub devices: Option<PathBuf>,
    pub client_id: String,
}

impl Default for HomeAgentConfig {
    fn default() -> Self {
        Self {
            http_bind: SocketAddr::from(([127, 0, 0, 1], DEFAULT_HTTP_PORT)),
            bus: None,
            journal: None,
            devices: None,
            client_id: "home-agent".into(),
        }
    }
}

impl IntoResponse for HomeError {
    fn into_response(self) -> Response {
        let status = match &self {
            HomeError::UnknownObject(_) => StatusCode::UNPROCESSABLE_ENTITY,
            HomeError::UnknownRelay(_) => StatusCode::NOT_FOUND,
            HomeError::Bus(_) => StatusCode::SERVICE_UNAVAILABLE,
            HomeError::Journal(_) | HomeError::DeviceTable(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        (status, self.to_string()).into_response()
    }
}

async fn command(State(agent): State<Arc<HomeAgent>>, body: Bytes) -> Result<String, Response> {
    let command = decode(&body).map_err(|e| (StatusCode::BAD_REQUEST, e.to_string()).into_response())?;
    agent.handle_command(&command).await.map_err(IntoResponse::into_response)
}

#[derive(Deserialize)]
struct Switch {
    on: bool,
}

async fn actuator(
    State(agent): State<Arc<HomeAgent>>,
    Path(relay): Path<String>,
    Json(body): Json<Switch>,
) -> Result<Response, HomeError> {
    Ok(Json(agent.set_actuator(&relay, body.on).await?).into_response())
}

pub fn router(agent: Arc<HomeAgent>) -> Router {
    Router::new()
        .route("/command", post(command))
        .route("/state", get(|State(agent): State<Arc<HomeAgent>>| async move { Json(agent.query_state()) }))
        .route("/actuators/{relay}", post(actuator))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(agent)
}

/// Keeps a bus connection alive, feeding sensor payloads to the agent.
async fn bus_loop(agent: Arc<HomeAgent>, addr: SocketAddr, client_id: String, cancel: CancellationToken) {
    let mut backoff = Backoff::default();
    let options = ClientOptions { auto_ack: false, ..ClientOptions::default() };
    loop {
        match BusClient::connect(addr, &client_id, options.clone()).await {
            Ok((client, mut deliveries)) => {
                let subscribed = async {
                    client.subscribe(SENSOR_TOPIC).await?;
                    client.subscribe(COMMAND_NACK_TOPIC).await
                };
                match subscribed.await {
                    Ok(()) => {
                        backoff.reset();
                        agent.set_bus(Some(client.clone()));
                        tracing::info!(%addr, "home agent connected to bus");
                        loop {
                            let delivery = tokio::select! {
                                _ = cancel.cancelled() => {
                                    client.disconnect();
                                    return;
                                }
                                d = deliveries.recv() => match d {
                                    Some(d) => d,
                                    None => break,
                                },
                            };
                            if delivery.topic == COMMAND_NACK_TOPIC {
                                tracing::warn!(payload = %delivery.payload, "device rejected a command");
                            } else if let Err(e) = agent.ingest(&delivery.payload).await {
                                // Poison payloads are acknowledged so they are not redelivered forever.
                                tracing::warn!(error = %e, "sensor payload rejected");
                            }
                            let _ = client.ack(delivery.id);
                        }
                        agent.set_bus(None);
                        tracing::warn!("home agent lost bus connection");
                    }
                    Err(e) => tracing::warn!(error = %e, "bus subscribe failed"),
                }
            }
            Err(e) => tracing::warn!(%addr, error = %e, "bus connect failed"),
        }
        tokio::select! {
            _ = cancel.cancelled() => return,
            _ = tokio::time::sleep(backoff.next_delay()) => {}
        }
    }
}

pub struct HomeAgentHandle {
    pub agent: Arc<HomeAgent>,
    http_addr: SocketAddr,
    cancel: CancellationToken,
    tasks: Vec<JoinHandle<()>>,
}

impl HomeAgentHandle {
    pub fn http_addr(&self) -> SocketAddr {
        self.http_addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.http_addr)
    }

    pub fn is_running(&self) -> bool {
        self.tasks.iter().all(|t| !t.is_finished())
    }

    pub async fn shutdown(mut self) {
        self.cancel.cancel();
        for task in self.tasks.drain(..) {
            let _ = task.await;
        }
    }

    /// Resolves if the HTTP server stops on its own.
    pub async fn wait(&mut self) {
        if let Some(server) = self.tasks.first_mut() {
            let _ = server.await;
        }
    }
}

impl Drop for HomeAgentHandle {
    fn drop(&mut self) {
        self.cancel.cancel();
    }
}

/// Starts the HTTP API and, when configured, the bus connection.
pub async fn serve(config: HomeAgentConfig) -> Result<HomeAgentHandle, HomeError> {
    let devices = match &config.devices {
        Some(path) => SynonymTable::load(path)?,
        None => SynonymTable::builtin(),
    };
    let mut agent = HomeAgent::new(devices);
    if let Some(journal) = &config.journal {
        agent = agent.with_journal(journal)?;
    }
    serve_agent(Arc::new(agent), config).await
}

pub async fn serve_agent(agent: Arc<HomeAgent>, config: HomeAgentConfig) -> Result<HomeAgentHandle, HomeError> {
    let listener = TcpListener::bind(config.http_bind).await?;
    let http_addr = listener.local_addr()?;
    let cancel = CancellationToken::new();
    let token = cancel.clone();
    let app = router(agent.clone());
    let mut tasks = vec![tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(token.cancelled_owned()).await {
            tracing::error!(error = %e, "home agent http server failed");
        }
    })];
    if let Some(bus) = config.bus {
        tasks.push(tokio::spawn(bus_loop(agent.clone(), bus, config.client_id.clone(), cancel.clone())));
    }
    tracing::info!(addr = %http_addr, "home agent listening");
    Ok(HomeAgentHandle { agent, http_addr, cancel, tasks })
}
