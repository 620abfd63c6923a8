use std::net::SocketAddr;

use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;
use tokio_util::sync::CancellationToken;

use crate::bus::{Backoff, BusClient, ClientOptions, COMMAND_TOPIC, SENSOR_TOPIC};
use crate::dialog::ReplyKind;
use crate::home::{HomeCommand, ReadingPayload};

/// One item on the console event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Reading { reading: ReadingPayload },
    Actuator { command: HomeCommand },
    Chat { session_id: String, text: String, reply_kind: ReplyKind, reply_text: String },
}

/// Mirrors sensor readings and relay commands from the bus onto the event
/// channel, reconnecting with backoff.
pub(super) async fn forward_bus(addr: SocketAddr, events: broadcast::Sender<Event>, cancel: CancellationToken) {
    let mut backoff = Backoff::default();
    loop {
        match BusClient::connect(addr, "assistant-service", ClientOptions::default()).await {
            Ok((client, mut deliveries)) => {
                let subscribed = async {
                    client.subscribe(SENSOR_TOPIC).await?;
                    client.subscribe(COMMAND_TOPIC).await
                };
                if subscribed.await.is_ok() {
                    backoff.reset();
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
                        let event = match delivery.topic.as_str() {
                            SENSOR_TOPIC => serde_json::from_str(&delivery.payload).ok().map(|reading| Event::Reading { reading }),
                            COMMAND_TOPIC => serde_json::from_str(&delivery.payload).ok().map(|command| Event::Actuator { command }),
                            _ => None,
                        };
                        if let Some(event) = event {
                            // No receivers is fine: nobody is watching.
                            let _ = events.send(event);
                        }
                    }
                }
            }
            Err(e) => tracing::debug!(error = %e, "event forwarder cannot reach broker"),
        }
        tokio::select! {
            _ = cancel.cancelled() => return,
            _ = tokio::time::sleep(backoff.next_delay()) => {}
        }
    }
}
