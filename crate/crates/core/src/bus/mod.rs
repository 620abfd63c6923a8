//! Topic-based publish/subscribe over newline-delimited JSON on TCP, with
//! at-least-once delivery.
//!
//! Roles follow the usual broker pattern: publishers send to the broker, the
//! broker fans out to every subscriber whose filter matches and keeps
//! redelivering until each subscriber acknowledges. A client can hold both
//! roles on one connection.

mod broker;
mod client;
mod frame;
mod topic;

use std::net::SocketAddr;
use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use broker::{Broker, BrokerConfig};
pub use client::{BusClient, ClientOptions, Deliveries, Delivery};
pub use frame::{Frame, Op, MAX_FRAME_BYTES};
pub use topic::{validate_topic, TopicFilter};

pub const DEFAULT_PORT: u16 = 1883;
pub const DEFAULT_RETRY_INTERVAL: Duration = Duration::from_secs(1);

/// Topic the simulated device publishes readings on.
pub const SENSOR_TOPIC: &str = "home/sensorData";
/// Topic the home agent publishes actuator commands on.
pub const COMMAND_TOPIC: &str = "home/commands";
/// Topic the device reports rejected commands on.
pub const COMMAND_NACK_TOPIC: &str = "home/commands/nack";

#[derive(Debug, Error)]
pub enum BusError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: std::io::Error },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not connected")]
    NotConnected,
    #[error("bad topic filter {0}")]
    BadFilter(String),
    #[error("bad topic {0:?}")]
    BadTopic(String),
    #[error("frame of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("timed out waiting for {0:?}")]
    Timeout(Op),
}

/// Randomly discards PUBLISH and PUBACK frames crossing the broker, in both
/// directions. Other frames are never dropped.
#[derive(Debug)]
pub struct FaultInjector {
    drop_rate: f64,
    rng: Mutex<ChaCha8Rng>,
}

impl FaultInjector {
    pub fn new(drop_rate: f64, seed: u64) -> Self {
        Self { drop_rate: drop_rate.clamp(0.0, 1.0), rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)) }
    }

    pub fn none() -> Self {
        Self::new(0.0, 0)
    }

    pub(crate) fn should_drop(&self, op: Op) -> bool {
        if self.drop_rate == 0.0 || !matches!(op, Op::Publish | Op::Puback) {
            return false;
        }
        self.rng.lock().expect("rng lock poisoned").random_bool(self.drop_rate)
    }
}

/// Reconnect delays: 1 s, 2 s, 4 s, ... capped at 30 s.
#[derive(Debug, Clone)]
pub struct Backoff {
    initial: Duration,
    cap: Duration,
    next: Duration,
}

impl Backoff {
    pub fn new(initial: Duration, cap: Duration) -> Self {
        Self { initial, cap, next: initial }
    }

    pub fn next_delay(&mut self) -> Duration {
        let delay = self.next;
        self.next = (self.next * 2).min(self.cap);
        delay
    }

    pub fn reset(&mut self) {
        self.next = self.initial;
    }
}

impl Default for Backoff {
    fn default() -> Self {
        Self::new(Duration::from_secs(1), Duration::from_secs(30))
    }
}
