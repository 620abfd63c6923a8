//! The smart home agent: turns dispatched commands into bus commands for the
//! device, keeps the latest sensor state, and journals readings.

mod agent;
mod http;
mod synonyms;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agent::{thermostat_step, HomeAgent, HomeState, Journal, HYSTERESIS};
pub use http::{router, serve, serve_agent, HomeAgentConfig, HomeAgentHandle, DEFAULT_HTTP_PORT};
pub use synonyms::{DeviceEntry, DeviceKind, SynonymTable};

use crate::bus::BusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    On,
    Off,
    SetSetpoint,
}

/// Payload on the command topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeCommand {
    pub relay: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setpoint: Option<f64>,
    pub correlation_id: String,
}

impl HomeCommand {
    pub fn new(relay: impl Into<String>, action: Action) -> Self {
        Self {
            relay: relay.into(),
            action,
            setpoint: None,
            correlation_id: uuid::Uuid::new_v4().to_string(),
        }
    }

    pub fn switch(relay: impl Into<String>, on: bool) -> Self {
        Self::new(relay, if on { Action::On } else { Action::Off })
    }

    pub fn setpoint(relay: impl Into<String>, celsius: f64) -> Self {
        Self { setpoint: Some(celsius), ..Self::new(relay, Action::SetSetpoint) }
    }
}

/// Payload on the sensor topic: one sample of every sensor on a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingPayload {
    pub device: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub humidity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light: Option<f64>,
    pub ts: DateTime<Utc>,
    /// Relay states as the device sees them, when it reports them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relays: Option<std::collections::BTreeMap<String, bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Temperature,
    Humidity,
    Light,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub device_id: String,
    pub sensor: SensorKind,
    pub value: f64,
    pub ts: DateTime<Utc>,
}

impl ReadingPayload {
    /// Splits the payload into per-sensor readings, checking value ranges.
    pub fn readings(&self) -> Result<Vec<SensorReading>, HomeError> {
        let bad = |why: String| Err(HomeError::MalformedReading(why));
        if self.device.is_empty() {
            return bad("empty device id".into());
        }
        let mut out = Vec::new();
        for (sensor, value) in [
            (SensorKind::Temperature, self.temperature),
            (SensorKind::Humidity, self.humidity),
            (SensorKind::Light, self.light),
        ] {
            let Some(value) = value else { continue };
            let ok = value.is_finite()
                && match sensor {
                    SensorKind::Temperature => true,
                    SensorKind::Humidity => (0.0..=100.0).contains(&value),
                    SensorKind::Light => (0.0..=1.0).contains(&value),
                };
            if !ok {
                return bad(format!("{sensor:?} value {value} out of range"));
            }
            out.push(SensorReading { device_id: self.device.clone(), sensor, value, ts: self.ts });
        }
        if out.is_empty() {
            return bad("no sensor values".into());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    pub relay_id: String,
    pub on: bool,
    pub last_changed: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setpoint: Option<f64>,
}

#[derive(Debug, Error)]
pub enum HomeError {
    #[error("Sorry, I don't know which device \"{0}\" is.")]
    UnknownObject(String),
    #[error("missing parameter {0:?}")]
    MissingParam(String),
    #[error("{0:?} is not a number")]
    BadNumber(String),
    #[error("this agent serves the Home app, not {0:?}")]
    WrongApp(String),
    #[error("unsupported intent {0:?}")]
    UnknownIntent(String),
    #[error("unknown relay {0:?}")]
    UnknownRelay(String),
    #[error("malformed reading: {0}")]
    MalformedReading(String),
    #[error("invalid device table: {0}")]
    DeviceTable(String),
    #[error("bus unavailable: {0}")]
    Bus(#[from] BusError),
    #[error("journal: {0}")]
    Journal(#[from] std::io::Error),
}
