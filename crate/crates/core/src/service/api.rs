use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use serde_json::value::RawValue;
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use super::{Event, ServiceState};
use crate::bus::{BusClient, ClientOptions};
use crate::dialog::{EngineError, ReplyKind};
use crate::dispatch::encode;
use crate::registry::{parse_descriptor, RegistryError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub session_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub reply_kind: ReplyKind,
    pub reply_text: String,
    /// Exactly the bytes that were posted to the app.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatched_command: Option<Box<RawValue>>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn chat(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let request: ChatRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed chat request: {e}")),
    };
    if request.session_id.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "session_id must not be empty");
    }
    let reply = match state.engine.handle_message(&request.session_id, &request.text).await {
        Ok(reply) => reply,
        Err(EngineError::Lang(e)) => return error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => {
            tracing::error!(error = %e, "chat handling failed");
            return error(StatusCode::INTERNAL_SERVER_ERROR, "internal error");
        }
    };
    let dispatched_command = reply.dispatched.as_ref().map(|command| {
        let bytes = encode(command);
        RawValue::from_string(String::from_utf8(bytes).expect("encoded command is UTF-8"))
            .expect("encoded command is JSON")
    });
    let _ = state.events.send(Event::Chat {
        session_id: request.session_id,
        text: request.text,
        reply_kind: reply.kind,
        reply_text: reply.text.clone(),
    });
    Json(ChatResponse { reply_kind: reply.kind, reply_text: reply.text, dispatched_command }).into_response()
}

fn registry_error(e: RegistryError) -> Response {
    match e {
        RegistryError::NameConflict(_) => error(StatusCode::CONFLICT, e.to_string()),
        RegistryError::NotFound(_) => error(StatusCode::NOT_FOUND, e.to_string()),
        RegistryError::SchemaViolation { ref path, ref message } => (
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(json!({ "error": e.to_string(), "path": path, "message": message })),
        )
            .into_response(),
        RegistryError::Io { .. } => {
            tracing::error!(error = %e, "registry write failed");
            error(StatusCode::INTERNAL_SERVER_ERROR, "internal error")
        }
        _ => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    }
}

async fn register_app(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let descriptor = match parse_descriptor(&body) {
        Ok(d) => d,
        Err(e) => return registry_error(e),
    };
    let json = descriptor.to_json();
    match state.registry.register(descriptor) {
        Ok(()) => (StatusCode::CREATED, [(header::CONTENT_TYPE, "application/json")], json).into_response(),
        Err(e) => registry_error(e),
    }
}

async fn list_apps(State(state): State<Arc<ServiceState>>) -> Response {
    Json(state.registry.snapshot().list().to_vec()).into_response()
}

async fn get_app(State(state): State<Arc<ServiceState>>, Path(name): Path<String>) -> Response {
    match state.registry.snapshot().get(&name) {
        Ok(app) => Json(app.clone()).into_response(),
        Err(e) => registry_error(e),
    }
}

async fn remove_app(State(state): State<Arc<ServiceState>>, Path(name): Path<String>) -> Response {
    match state.registry.remove(&name) {
        Ok(_) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => registry_error(e),
    }
}

/// Forwards to the home agent, keeping its status code and body.
async fn proxy(state: &ServiceState, request: impl FnOnce(&reqwest::Client, &str) -> reqwest::RequestBuilder) -> Response {
    let Some(base) = &state.agent_url else {
        return error(StatusCode::BAD_GATEWAY, "no home agent configured");
    };
    let response = match request(&state.http, base).send().await {
        Ok(r) => r,
        Err(e) => {
            tracing::warn!(error = %e, "home agent unreachable");
            return error(StatusCode::BAD_GATEWAY, "home agent unreachable");
        }
    };
    let status = StatusCode::from_u16(response.status().as_u16()).unwrap_or(StatusCode::BAD_GATEWAY);
    let content_type = response
        .headers()
        .get(reqwest::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("text/plain; charset=utf-8")
        .to_string();
    match response.bytes().await {
        Ok(body) => (status, [(header::CONTENT_TYPE, content_type)], body).into_response(),
        Err(_) => error(StatusCode::BAD_GATEWAY, "home agent response interrupted"),
    }
}

async fn home_state(State(state): State<Arc<ServiceState>>) -> Response {
    proxy(&state, |http, base| http.get(format!("{base}/state"))).await
}

async fn home_actuator(State(state): State<Arc<ServiceState>>, Path(relay): Path<String>, body: Bytes) -> Response {
    proxy(&state, |http, base| {
        http.post(format!("{base}/actuators/{relay}"))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body)
    })
    .await
}

async fn healthz(State(state): State<Arc<ServiceState>>) -> Response {
    let agent = match &state.agent_url {
        None => "not_configured",
        Some(base) => match state.http.get(format!("{base}/healthz")).timeout(Duration::from_secs(2)).send().await {
            Ok(r) if r.status().is_success() => "ok",
            _ => "unreachable",
        },
    };
    let broker = match state.bus {
        None => "not_configured",
        Some(addr) => {
            let probe = ClientOptions { request_timeout: Duration::from_secs(1), ..ClientOptions::default() };
            let id = format!("healthz-{}", uuid::Uuid::new_v4());
            match BusClient::connect(addr, &id, probe).await {
                Ok((client, _)) => {
                    let alive = client.ping().await.is_ok();
                    client.disconnect();
                    if alive { "ok" } else { "unreachable" }
                }
                Err(_) => "unreachable",
            }
        }
    };
    let healthy = agent != "unreachable" && broker != "unreachable";
    let status = if healthy { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    let body = json!({
        "status": if healthy { "ok" } else { "degraded" },
        "dpa": "ok",
        "agent": agent,
        "broker": broker,
    });
    (status, Json(body)).into_response()
}

async fn events(State(state): State<Arc<ServiceState>>) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let stream = BroadcastStream::new(state.events.subscribe()).filter_map(|item| {
        let event = item.ok()?;
        let kind = match &event {
            Event::Reading { .. } => "reading",
            Event::Actuator { .. } => "actuator",
            Event::Chat { .. } => "chat",
        };
        SseEvent::default().event(kind).json_data(&event).ok().map(Ok)
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/chat", post(chat))
        .route("/api/apps", post(register_app).get(list_apps))
        .route("/api/apps/{name}", delete(remove_app).get(get_app))
        .route("/api/home/state", get(home_state))
        .route("/api/home/actuators/{relay}", post(home_actuator))
        .route("/api/healthz", get(healthz))
        .route("/api/events", get(events))
        .with_state(state)
}
