use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio::sync::{mpsc, oneshot};
use tokio::time::timeout;
use tokio_util::codec::{FramedRead, FramedWrite};
use tokio_util::sync::CancellationToken;

use super::frame::codec;
use super::{validate_topic, BusError, Frame, Op, TopicFilter, DEFAULT_RETRY_INTERVAL};

#[derive(Debug, Clone)]
pub struct ClientOptions {
    /// How long to wait for a PUBACK before retransmitting a publish.
    pub retry_interval: Duration,
    /// Timeout for CONNACK, SUBACK and PONG.
    pub request_timeout: Duration,
    /// Acknowledge deliveries as soon as they arrive. When false the caller
    /// must call [`BusClient::ack`].
    pub auto_ack: bool,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self { retry_interval: DEFAULT_RETRY_INTERVAL, request_timeout: Duration::from_secs(5), auto_ack: true }
    }
}

/// A message received on a subscription. Redeliveries carry the same id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub id: u64,
    pub topic: String,
    pub payload: String,
}

/// Stream of deliveries for one connection; ends when the connection does.
pub struct Deliveries {
    rx: mpsc::UnboundedReceiver<Delivery>,
}

impl Deliveries {
    pub async fn recv(&mut self) -> Option<Delivery> {
        self.rx.recv().await
    }

    pub fn try_recv(&mut self) -> Option<Delivery> {
        self.rx.try_recv().ok()
    }
}

type Waiters = Mutex<HashMap<(Op, u64), oneshot::Sender<Frame>>>;

struct Inner {
    client_id: String,
    options: ClientOptions,
    out: mpsc::UnboundedSender<Frame>,
    waiters: Waiters,
    next_id: AtomicU64,
    publish_lock: tokio::sync::Mutex<()>,
    connected: AtomicBool,
    closed: CancellationToken,
}

impl Inner {
    fn waiter(&self, op: Op, id: u64) -> oneshot::Receiver<Frame> {
        let (tx, rx) = oneshot::channel();
        self.waiters.lock().expect("waiters poisoned").insert((op, id), tx);
        rx
    }

    fn forget(&self, op: Op, id: u64) {
        self.waiters.lock().expect("waiters poisoned").remove(&(op, id));
    }

    fn send(&self, frame: Frame) -> Result<(), BusError> {
        if !self.connected.load(Ordering::Acquire) {
            return Err(BusError::NotConnected);
        }
        self.out.send(frame).map_err(|_| BusError::NotConnected)
    }

    async fn request(&self, frame: Frame, reply: Op) -> Result<Frame, BusError> {
        let id = frame.id.expect("requests carry an id");
        let rx = self.waiter(reply, id);
        self.send(frame)?;
        let outcome = tokio::select! {
            r = timeout(self.options.request_timeout, rx) => r,
            _ = self.closed.cancelled() => return Err(BusError::NotConnected),
        };
        match outcome {
            Ok(Ok(frame)) => Ok(frame),
            Ok(Err(_)) => Err(BusError::NotConnected),
            Err(_) => {
                self.forget(reply, id);
                Err(BusError::Timeout(reply))
            }
        }
    }
}

/// Connection to a broker. Cheap to clone; all clones share the connection.
#[derive(Clone)]
pub struct BusClient {
    inner: Arc<Inner>,
}

impl BusClient {
    pub async fn connect(
        addr: SocketAddr,
        client_id: &str,
        options: ClientOptions,
    ) -> Result<(Self, Deliveries), BusError> {
        let stream = timeout(options.request_timeout, TcpStream::connect(addr))
            .await
            .map_err(|_| BusError::Timeout(Op::Connect))??;
        stream.set_nodelay(true)?;
        let (r, w) = stream.into_split();
        let mut reader = FramedRead::new(r, codec());
        let mut writer = FramedWrite::new(w, codec());

        writer
            .send(Frame::connect(client_id).encode()?)
            .await
            .map_err(|e| BusError::Protocol(e.to_string()))?;
        match timeout(options.request_timeout, reader.next()).await {
            Ok(Some(Ok(line))) if Frame::decode(&line)?.op == Op::Connack => {}
            Ok(Some(Ok(line))) => return Err(BusError::Protocol(format!("expected CONNACK, got {line}"))),
            Ok(Some(Err(e))) => return Err(BusError::Protocol(e.to_string())),
            Ok(None) => return Err(BusError::NotConnected),
            Err(_) => return Err(BusError::Timeout(Op::Connack)),
        }

        let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Frame>();
        let (deliver_tx, deliver_rx) = mpsc::unbounded_channel();
        let inner = Arc::new(Inner {
            client_id: client_id.to_string(),
            options,
            out: out_tx,
            waiters: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(0),
            publish_lock: tokio::sync::Mutex::new(()),
            connected: AtomicBool::new(true),
            closed: CancellationToken::new(),
        });

        let closed = inner.closed.clone();
        tokio::spawn(async move {
            loop {
                tokio::select! {
                    _ = closed.cancelled() => break,
                    frame = out_rx.recv() => {
                        let Some(frame) = frame else { break };
                        let Ok(line) = frame.encode() else { continue };
                        if writer.send(line).await.is_err() {
                            break;
                        }
                    }
                }
            }
            closed.cancel();
        });

        let weak = Arc::downgrade(&inner);
        let closed = inner.closed.clone();
        tokio::spawn(async move {
            loop {
                let line = tokio::select! {
                    _ = closed.cancelled() => break,
                    line = reader.next() => match line {
                        Some(Ok(line)) => line,
                        _ => break,
                    },
                };
                let Some(inner) = weak.upgrade() else { break };
                let frame = match Frame::decode(&line) {
                    Ok(frame) => frame,
                    Err(e) => {
                        tracing::warn!(client = %inner.client_id, error = %e, "bad frame from broker");
                        break;
                    }
                };
                let id = frame.id.unwrap_or_default();
                match frame.op {
                    Op::Publish => {
                        if inner.options.auto_ack {
                            let _ = inner.out.send(Frame::new(Op::Puback).with_id(id));
                        }
                        let delivery = Delivery {
                            id,
                            topic: frame.topic.unwrap_or_default(),
                            payload: frame.payload.unwrap_or_default(),
                        };
                        let _ = deliver_tx.send(delivery);
                    }
                    op @ (Op::Puback | Op::Suback | Op::Pong) => {
                        let waiter = inner.waiters.lock().expect("waiters poisoned").remove(&(op, id));
                        match waiter {
                            Some(tx) => {
                                let _ = tx.send(frame);
                            }
                            None => tracing::trace!(?op, id, "late reply ignored"),
                        }
                    }
                    other => tracing::debug!(op = ?other, "unexpected frame from broker"),
                }
            }
            closed.cancel();
            if let Some(inner) = weak.upgrade() {
                inner.connected.store(false, Ordering::Release);
                inner.waiters.lock().expect("waiters poisoned").clear();
            }
        });

        Ok((Self { inner }, Deliveries { rx: deliver_rx }))
    }

    pub fn client_id(&self) -> &str {
        &self.inner.client_id
    }

    pub fn is_connected(&self) -> bool {
        self.inner.connected.load(Ordering::Acquire) && !self.inner.closed.is_cancelled()
    }

    /// Resolves once the connection is gone.
    pub async fn closed(&self) {
        self.inner.closed.cancelled().await
    }

    fn next_id(&self) -> u64 {
        self.inner.next_id.fetch_add(1, Ordering::Relaxed) + 1
    }

    pub async fn subscribe(&self, filter: &str) -> Result<(), BusError> {
        TopicFilter::parse(filter)?;
        let frame = Frame::new(Op::Subscribe).with_id(self.next_id()).with_topic(filter);
        let reply = self.inner.request(frame, Op::Suback).await?;
        match reply.payload {
            Some(reason) => Err(BusError::BadFilter(reason)),
            None => Ok(()),
        }
    }

    /// Publishes and waits until the broker has accepted the message,
    /// retransmitting every retry interval. Publishes from one client are
    /// accepted strictly in call order.
    pub async fn publish(&self, topic: &str, payload: &str) -> Result<u64, BusError> {
        validate_topic(topic)?;
        let _turn = self.inner.publish_lock.lock().await;
        let id = self.next_id();
        let frame = Frame::publish(id, topic, payload);
        frame.encode()?;
        loop {
            let rx = self.inner.waiter(Op::Puback, id);
            self.inner.send(frame.clone())?;
            tokio::select! {
                reply = timeout(self.inner.options.retry_interval, rx) => match reply {
                    Ok(Ok(_)) => return Ok(id),
                    Ok(Err(_)) => return Err(BusError::NotConnected),
                    Err(_) => tracing::trace!(id, "publish not acknowledged, retransmitting"),
                },
                _ = self.inner.closed.cancelled() => return Err(BusError::NotConnected),
            }
        }
    }

    pub fn ack(&self, id: u64) -> Result<(), BusError> {
        self.inner.send(Frame::new(Op::Puback).with_id(id))
    }

    pub async fn ping(&self) -> Result<(), BusError> {
        let frame = Frame::new(Op::Ping).with_id(self.next_id());
        self.inner.request(frame, Op::Pong).await.map(|_| ())
    }

    /// Closes the connection for every clone.
    pub fn disconnect(&self) {
        self.inner.connected.store(false, Ordering::Release);
        self.inner.closed.cancel();
    }
}
