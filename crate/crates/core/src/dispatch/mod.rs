//! Delivery of resolved commands to apps over HTTP.

mod command;

use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub use command::{decode, encode, CommandMessage};

use crate::registry::AppDescriptor;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DispatchStatus {
    Ok { body: String },
    AppError { code: u16, body: String },
    Unreachable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchResult {
    pub status: DispatchStatus,
    pub latency: Duration,
}

/// Endpoint an app receives commands on.
pub fn command_url(base: &str) -> String {
    format!("{}/command", base.trim_end_matches('/'))
}

#[async_trait]
pub trait Dispatcher: Send + Sync {
    async fn dispatch(&self, app: &AppDescriptor, command: &CommandMessage) -> DispatchResult;
}

/// POSTs the encoded command to `<url>/command`. No retries.
#[derive(Debug, Clone)]
pub struct HttpDispatcher {
    client: reqwest::Client,
    timeout: Duration,
}

impl HttpDispatcher {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .connect_timeout(timeout)
            .build()
            .expect("http client builds");
        Self { client, timeout }
    }

    pub async fn send(&self, command: &CommandMessage, url: &str) -> DispatchResult {
        let started = Instant::now();
        let request = self
            .client
            .post(command_url(url))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(encode(command))
            .send();
        // The client timeout already bounds the request; this is a hard stop.
        let guard = self.timeout + Duration::from_millis(500);
        let status = match tokio::time::timeout(guard, async {
            let response = request.await?;
            let code = response.status();
            let body = response.text().await?;
            Ok::<_, reqwest::Error>((code, body))
        })
        .await
        {
            Ok(Ok((code, body))) if code.is_success() => DispatchStatus::Ok { body },
            Ok(Ok((code, body))) => DispatchStatus::AppError { code: code.as_u16(), body },
            Ok(Err(e)) => DispatchStatus::Unreachable { reason: e.to_string() },
            Err(_) => DispatchStatus::Unreachable { reason: "timed out".into() },
        };
        DispatchResult { status, latency: started.elapsed() }
    }
}

impl Default for HttpDispatcher {
    fn default() -> Self {
        Self::new(DEFAULT_TIMEOUT)
    }
}

#[async_trait]
impl Dispatcher for HttpDispatcher {
    async fn dispatch(&self, app: &AppDescriptor, command: &CommandMessage) -> DispatchResult {
        self.send(command, &app.url).await
    }
}

/// Sends nothing; every command "succeeds". For offline sessions.
#[derive(Debug, Clone, Copy, Default)]
pub struct DryRunDispatcher;

#[async_trait]
impl Dispatcher for DryRunDispatcher {
    async fn dispatch(&self, _app: &AppDescriptor, command: &CommandMessage) -> DispatchResult {
        let body = String::from_utf8(encode(command)).expect("encoded command is UTF-8");
        DispatchResult { status: DispatchStatus::Ok { body: format!("(not sent) {body}") }, latency: Duration::ZERO }
    }
}
