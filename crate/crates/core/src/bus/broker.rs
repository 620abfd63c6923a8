use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tokio::time::{sleep_until, timeout, Instant};
use tokio_util::codec::{FramedRead, FramedWrite};
use tokio_util::sync::CancellationToken;

use super::frame::codec;
use super::{validate_topic, BusError, FaultInjector, Frame, Op, TopicFilter, DEFAULT_PORT, DEFAULT_RETRY_INTERVAL};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone)]
pub struct BrokerConfig {
    pub bind: SocketAddr,
    pub retry_interval: Duration,
    /// Probability of discarding each PUBLISH/PUBACK frame; 0 in production.
    pub drop_rate: f64,
    pub fault_seed: u64,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], DEFAULT_PORT)),
            retry_interval: DEFAULT_RETRY_INTERVAL,
            drop_rate: 0.0,
            fault_seed: 0,
        }
    }
}

struct Queued {
    id: u64,
    topic: String,
    payload: String,
}

#[derive(Default)]
struct Table {
    subs: Vec<(u64, TopicFilter)>,
    queues: HashMap<u64, mpsc::UnboundedSender<Queued>>,
}

struct Shared {
    retry_interval: Duration,
    faults: FaultInjector,
    next_msg_id: AtomicU64,
    next_conn: AtomicU64,
    table: Mutex<Table>,
}

impl Shared {
    fn table(&self) -> std::sync::MutexGuard<'_, Table> {
        self.table.lock().expect("broker table poisoned")
    }

    /// Assigns a broker-wide id and queues one delivery per matching
    /// connection, however many of its filters match.
    fn fan_out(&self, topic: &str, payload: &str) -> u64 {
        let id = self.next_msg_id.fetch_add(1, Ordering::Relaxed) + 1;
        let table = self.table();
        let mut targets: Vec<u64> =
            table.subs.iter().filter(|(_, f)| f.matches(topic)).map(|(c, _)| *c).collect();
        targets.dedup();
        for conn in targets {
            if let Some(queue) = table.queues.get(&conn) {
                let _ = queue.send(Queued { id, topic: topic.to_string(), payload: payload.to_string() });
            }
        }
        id
    }
}

/// A running broker. Dropping the handle stops it.
pub struct Broker {
    local_addr: SocketAddr,
    cancel: CancellationToken,
    task: JoinHandle<()>,
}

impl Broker {
    pub async fn start(config: BrokerConfig) -> Result<Self, BusError> {
        let listener = TcpListener::bind(config.bind)
            .await
            .map_err(|source| BusError::BindFailure { addr: config.bind, source })?;
        let local_addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            retry_interval: config.retry_interval,
            faults: FaultInjector::new(config.drop_rate, config.fault_seed),
            next_msg_id: AtomicU64::new(0),
            next_conn: AtomicU64::new(0),
            table: Mutex::new(Table::default()),
        });
        let cancel = CancellationToken::new();
        let token = cancel.clone();
        let task = tokio::spawn(async move {
            loop {
                tokio::select! {
                    _ = token.cancelled() => break,
                    accepted = listener.accept() => match accepted {
                        Ok((stream, peer)) => {
                            let shared = shared.clone();
                            let token = token.child_token();
                            tokio::spawn(async move {
                                if let Err(e) = serve(shared, stream, token).await {
                                    tracing::debug!(%peer, error = %e, "bus connection closed");
                                }
                            });
                        }
                        Err(e) => tracing::warn!(error = %e, "accept failed"),
                    }
                }
            }
        });
        tracing::info!(addr = %local_addr, "bus broker listening");
        Ok(Self { local_addr, cancel, task })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn is_running(&self) -> bool {
        !self.task.is_finished()
    }

    /// Stops accepting and closes every connection.
    pub async fn shutdown(mut self) {
        self.cancel.cancel();
        let _ = (&mut self.task).await;
    }

    /// Resolves when the broker stops.
    pub async fn wait(&mut self) {
        let _ = (&mut self.task).await;
    }
}

impl Drop for Broker {
    fn drop(&mut self) {
        self.cancel.cancel();
    }
}

async fn serve(shared: Arc<Shared>, stream: TcpStream, cancel: CancellationToken) -> Result<(), BusError> {
    stream.set_nodelay(true)?;
    let (r, w) = stream.into_split();
    let mut reader = FramedRead::new(r, codec());

    let hello = match timeout(CONNECT_TIMEOUT, reader.next()).await {
        Ok(Some(Ok(line))) => Frame::decode(&line)?,
        Ok(Some(Err(e))) => return Err(BusError::Protocol(e.to_string())),
        Ok(None) => return Ok(()),
        Err(_) => return Err(BusError::Timeout(Op::Connect)),
    };
    if hello.op != Op::Connect {
        return Err(BusError::Protocol(format!("expected CONNECT, got {:?}", hello.op)));
    }
    let client = hello.client;
    let conn = shared.next_conn.fetch_add(1, Ordering::Relaxed);

    let (out_tx, out_rx) = mpsc::unbounded_channel::<Frame>();
    let writer = tokio::spawn(write_frames(shared.clone(), FramedWrite::new(w, codec()), out_rx));
    let (queue_tx, queue_rx) = mpsc::unbounded_channel();
    let (ack_tx, ack_rx) = mpsc::unbounded_channel();
    shared.table().queues.insert(conn, queue_tx);
    let delivery = tokio::spawn(deliver(queue_rx, ack_rx, out_tx.clone(), shared.retry_interval));
    let _ = out_tx.send(Frame::new(Op::Connack));
    tracing::debug!(%client, conn, "bus client connected");

    let result = read_frames(&shared, conn, &client, &mut reader, &out_tx, &ack_tx, &cancel).await;

    {
        let mut table = shared.table();
        table.queues.remove(&conn);
        table.subs.retain(|(c, _)| *c != conn);
    }
    delivery.abort();
    drop(out_tx);
    let _ = writer.await;
    tracing::debug!(%client, conn, "bus client disconnected");
    result
}

async fn write_frames(
    shared: Arc<Shared>,
    mut sink: FramedWrite<tokio::net::tcp::OwnedWriteHalf, tokio_util::codec::LinesCodec>,
    mut frames: mpsc::UnboundedReceiver<Frame>,
) {
    while let Some(frame) = frames.recv().await {
        if shared.faults.should_drop(frame.op) {
            tracing::trace!(op = ?frame.op, id = ?frame.id, "fault injection dropped outbound frame");
            continue;
        }
        let line = match frame.encode() {
            Ok(line) => line,
            Err(e) => {
                tracing::warn!(error = %e, "unencodable frame");
                continue;
            }
        };
        if sink.send(line).await.is_err() {
            break;
        }
    }
}

#[allow(clippy::too_many_arguments)]
async fn read_frames(
    shared: &Shared,
    conn: u64,
    client: &str,
    reader: &mut FramedRead<tokio::net::tcp::OwnedReadHalf, tokio_util::codec::LinesCodec>,
    out: &mpsc::UnboundedSender<Frame>,
    acks: &mpsc::UnboundedSender<u64>,
    cancel: &CancellationToken,
) -> Result<(), BusError> {
    // Highest publish id accepted from this client; retransmits at or below
    // it are acknowledged again but not fanned out twice.
    let mut accepted: Option<u64> = None;
    loop {
        let line = tokio::select! {
            _ = cancel.cancelled() => return Ok(()),
            line = reader.next() => match line {
                None => return Ok(()),
                Some(Err(e)) => return Err(BusError::Protocol(e.to_string())),
                Some(Ok(line)) => line,
            },
        };
        let frame = Frame::decode(&line)?;
        if shared.faults.should_drop(frame.op) {
            tracing::trace!(op = ?frame.op, id = ?frame.id, "fault injection dropped inbound frame");
            continue;
        }
        let id = frame.id.unwrap_or_default();
        match frame.op {
            Op::Publish => {
                let topic = frame.topic.unwrap_or_default();
                validate_topic(&topic)?;
                if accepted.is_some_and(|last| id <= last) {
                    tracing::debug!(%client, id, "duplicate publish acknowledged again");
                } else {
                    let msg_id = shared.fan_out(&topic, &frame.payload.unwrap_or_default());
                    tracing::trace!(%client, %topic, id, msg_id, "publish accepted");
                    accepted = Some(id);
                }
                let _ = out.send(Frame::new(Op::Puback).with_id(id));
            }
            Op::Puback => {
                let _ = acks.send(id);
            }
            Op::Subscribe => {
                let raw = frame.topic.unwrap_or_default();
                let reply = match TopicFilter::parse(&raw) {
                    Ok(filter) => {
                        let mut table = shared.table();
                        if !table.subs.iter().any(|(c, f)| *c == conn && *f == filter) {
                            table.subs.push((conn, filter));
                        }
                        Frame::new(Op::Suback).with_id(id).with_topic(raw)
                    }
                    Err(e) => Frame::new(Op::Suback).with_id(id).with_topic(raw).with_payload(e.to_string()),
                };
                let _ = out.send(reply);
            }
            Op::Ping => {
                let _ = out.send(Frame::new(Op::Pong).with_id(id));
            }
            other => tracing::debug!(%client, op = ?other, "unexpected frame ignored"),
        }
    }
}

/// Sends one message at a time to a subscriber and redelivers it every
/// `retry` until acknowledged, so first deliveries keep publish order.
async fn deliver(
    mut queue: mpsc::UnboundedReceiver<Queued>,
    mut acks: mpsc::UnboundedReceiver<u64>,
    out: mpsc::UnboundedSender<Frame>,
    retry: Duration,
) {
    let mut settled = 0u64;
    while let Some(msg) = queue.recv().await {
        let frame = Frame::publish(msg.id, &msg.topic, &msg.payload);
        let mut attempts = 0u32;
        'send: loop {
            attempts += 1;
            if out.send(frame.clone()).is_err() {
                return;
            }
            let deadline = Instant::now() + retry;
            loop {
                tokio::select! {
                    ack = acks.recv() => match ack {
                        None => return,
                        Some(id) if id == msg.id => break 'send,
                        Some(id) if id <= settled => tracing::trace!(id, "duplicate ack ignored"),
                        Some(id) => tracing::warn!(id, "ack for unknown message id ignored"),
                    },
                    _ = sleep_until(deadline) => {
                        tracing::trace!(id = msg.id, attempts, "redelivering");
                        continue 'send;
                    }
                }
            }
        }
        settled = msg.id;
    }
}
