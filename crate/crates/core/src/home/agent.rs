use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{
    Action, ActuatorState, HomeCommand, HomeError, ReadingPayload, SensorKind, SensorReading, SynonymTable,
};
use crate::bus::{BusClient, BusError, COMMAND_TOPIC};
use crate::clock::{Clock, SystemClock};
use crate::dispatch::CommandMessage;

/// Half-width of the thermostat's dead band, in °C.
pub const HYSTERESIS: f64 = 0.5;

/// Bang-bang control with a dead band of ±[`HYSTERESIS`] around the
/// setpoint. Only returns a command when the heater has to change state.
pub fn thermostat_step(relay: &str, temperature: f64, heater_on: bool, setpoint: f64) -> Option<HomeCommand> {
    if temperature < setpoint - HYSTERESIS && !heater_on {
        Some(HomeCommand::switch(relay, true))
    } else if temperature > setpoint + HYSTERESIS && heater_on {
        Some(HomeCommand::switch(relay, false))
    } else {
        None
    }
}

/// Latest readings and actuator states.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HomeState {
    pub readings: Vec<SensorReading>,
    pub actuators: Vec<ActuatorState>,
    /// Relay states last reported by each device.
    pub device_relays: BTreeMap<String, BTreeMap<String, bool>>,
}

#[derive(Debug, Default)]
struct LiveState {
    readings: BTreeMap<(String, SensorKind), SensorReading>,
    actuators: BTreeMap<String, ActuatorState>,
    device_relays: BTreeMap<String, BTreeMap<String, bool>>,
}

impl LiveState {
    /// Keeps the reading if it is newer than what is stored for its
    /// (device, sensor); older or equal timestamps are redeliveries.
    fn record(&mut self, reading: &SensorReading) -> bool {
        let key = (reading.device_id.clone(), reading.sensor);
        match self.readings.get(&key) {
            Some(existing) if existing.ts >= reading.ts => false,
            _ => {
                self.readings.insert(key, reading.clone());
                true
            }
        }
    }

    fn snapshot(&self) -> HomeState {
        HomeState {
            readings: self.readings.values().cloned().collect(),
            actuators: self.actuators.values().cloned().collect(),
            device_relays: self.device_relays.clone(),
        }
    }
}

/// Append-only JSON-lines file of accepted readings.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, readings: &[SensorReading]) -> std::io::Result<()> {
        let mut buf = Vec::new();
        for r in readings {
            serde_json::to_writer(&mut buf, r).map_err(std::io::Error::other)?;
            buf.push(b'\n');
        }
        self.file.write_all(&buf)?;
        self.file.flush()
    }

    pub fn read(path: impl AsRef<Path>) -> std::io::Result<Vec<SensorReading>> {
        let text = match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(r) => out.push(r),
                // A torn final line from a crash is skipped rather than fatal.
                Err(e) => tracing::warn!(line = n + 1, error = %e, "skipping journal line"),
            }
        }
        Ok(out)
    }

    /// Latest reading per (device, sensor) as rebuilt from the journal.
    pub fn replay(path: impl AsRef<Path>) -> std::io::Result<Vec<SensorReading>> {
        let mut state = LiveState::default();
        for r in Self::read(path)? {
            state.record(&r);
        }
        Ok(state.snapshot().readings)
    }
}

pub struct HomeAgent {
    devices: SynonymTable,
    state: RwLock<LiveState>,
    journal: Option<Mutex<Journal>>,
    bus: RwLock<Option<BusClient>>,
    clock: Arc<dyn Clock>,
}

impl HomeAgent {
    pub fn new(devices: SynonymTable) -> Self {
        let actuators = devices
            .relays()
            .map(|d| {
                (d.id.clone(), ActuatorState { relay_id: d.id.clone(), on: false, last_changed: None, setpoint: None })
            })
            .collect();
        Self {
            devices,
            state: RwLock::new(LiveState { actuators, ..LiveState::default() }),
            journal: None,
            bus: RwLock::new(None),
            clock: Arc::new(SystemClock),
        }
    }

    /// Opens (or creates) the journal and restores readings from it.
    pub fn with_journal(mut self, path: impl AsRef<Path>) -> Result<Self, HomeError> {
        let restored = Journal::replay(&path)?;
        {
            let mut state = self.state.write().expect("state poisoned");
            for r in &restored {
                state.record(r);
            }
        }
        self.journal = Some(Mutex::new(Journal::open(path)?));
        Ok(self)
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn devices(&self) -> &SynonymTable {
        &self.devices
    }

    pub fn journal_path(&self) -> Option<PathBuf> {
        self.journal.as_ref().map(|j| j.lock().expect("journal poisoned").path().to_path_buf())
    }

    pub fn set_bus(&self, client: Option<BusClient>) {
        *self.bus.write().expect("bus slot poisoned") = client;
    }

    pub fn bus_connected(&self) -> bool {
        self.bus.read().expect("bus slot poisoned").as_ref().is_some_and(|c| c.is_connected())
    }

    pub fn query_state(&self) -> HomeState {
        self.state.read().expect("state poisoned").snapshot()
    }

    pub fn actuator(&self, relay: &str) -> Option<ActuatorState> {
        self.state.read().expect("state poisoned").actuators.get(relay).cloned()
    }

    async fn publish(&self, command: &HomeCommand) -> Result<(), HomeError> {
        let client = self.bus.read().expect("bus slot poisoned").clone();
        let client = client.ok_or(HomeError::Bus(BusError::NotConnected))?;
        let payload = serde_json::to_string(command).expect("command serializes");
        client.publish(COMMAND_TOPIC, &payload).await?;
        tracing::info!(relay = %command.relay, action = ?command.action, correlation_id = %command.correlation_id, "home command published");
        Ok(())
    }

    /// Publishes the command, then records the new actuator state.
    async fn execute(&self, command: HomeCommand) -> Result<ActuatorState, HomeError> {
        if self.devices.device(&command.relay).is_none_or(|d| d.kind != super::DeviceKind::Relay) {
            return Err(HomeError::UnknownRelay(command.relay));
        }
        self.publish(&command).await?;
        let now = self.clock.now();
        let mut state = self.state.write().expect("state poisoned");
        let actuator = state.actuators.get_mut(&command.relay).expect("relays are pre-registered");
        let changed = match command.action {
            Action::On | Action::Off => {
                let on = command.action == Action::On;
                std::mem::replace(&mut actuator.on, on) != on
            }
            Action::SetSetpoint => std::mem::replace(&mut actuator.setpoint, command.setpoint) != command.setpoint,
        };
        if changed {
            actuator.last_changed = Some(now);
        }
        Ok(actuator.clone())
    }

    pub async fn set_actuator(&self, relay: &str, on: bool) -> Result<ActuatorState, HomeError> {
        self.execute(HomeCommand::switch(relay, on)).await
    }

    /// Executes a dispatched command and returns the confirmation text.
    pub async fn handle_command(&self, command: &CommandMessage) -> Result<String, HomeError> {
        if !command.app_name.eq_ignore_ascii_case("home") {
            return Err(HomeError::WrongApp(command.app_name.clone()));
        }
        let param = |name: &str| command.param(name).ok_or_else(|| HomeError::MissingParam(name.to_string()));
        let intent = command.intent.to_lowercase();
        match intent.as_str() {
            "turn on" | "turn off" => {
                let on = intent == "turn on";
                let object = param("object")?;
                let device = self
                    .devices
                    .lookup(object)
                    .filter(|d| d.kind == super::DeviceKind::Relay)
                    .ok_or_else(|| HomeError::UnknownObject(object.to_string()))?;
                self.execute(HomeCommand::switch(device.id.clone(), on)).await?;
                Ok(format!("Turned {} {object}.", if on { "on" } else { "off" }))
            }
            "set temperature" => {
                let raw = param("temperature")?;
                let celsius: f64 = raw
                    .trim()
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| HomeError::BadNumber(raw.to_string()))?;
                let heater = self
                    .devices
                    .thermostat()
                    .ok_or_else(|| HomeError::UnknownObject("heater".into()))?;
                self.execute(HomeCommand::setpoint(heater.id.clone(), celsius)).await?;
                Ok(format!("Temperature set to {raw} degrees."))
            }
            _ => Err(HomeError::UnknownIntent(command.intent.clone())),
        }
    }

    /// Stores a sensor payload. Returns how many readings were new; a
    /// redelivered payload returns 0 and leaves the journal untouched.
    pub async fn ingest(&self, payload: &str) -> Result<usize, HomeError> {
        let reading: ReadingPayload =
            serde_json::from_str(payload).map_err(|e| HomeError::MalformedReading(e.to_string()))?;
        let readings = reading.readings()?;
        let (fresh, thermostat) = {
            let mut state = self.state.write().expect("state poisoned");
            let fresh: Vec<SensorReading> = readings.into_iter().filter(|r| state.record(r)).collect();
            if let Some(relays) = &reading.relays {
                state.device_relays.insert(reading.device.clone(), relays.clone());
            }
            if !fresh.is_empty() {
                if let Some(journal) = &self.journal {
                    journal.lock().expect("journal poisoned").append(&fresh)?;
                }
            }
            let temperature = fresh.iter().find(|r| r.sensor == SensorKind::Temperature).map(|r| r.value);
            let thermostat = temperature.and_then(|t| {
                let heater = self.devices.thermostat()?;
                let actuator = state.actuators.get(&heater.id)?;
                thermostat_step(&heater.id, t, actuator.on, actuator.setpoint?)
            });
            (fresh.len(), thermostat)
        };
        if let Some(command) = thermostat {
            if let Err(e) = self.execute(command).await {
                tracing::warn!(error = %e, "thermostat command failed");
            }
        }
        Ok(fresh)
    }

    /// Timestamp of the newest stored reading, if any.
    pub fn latest_reading_ts(&self) -> Option<DateTime<Utc>> {
        self.state.read().expect("state poisoned").readings.values().map(|r| r.ts).max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn payload(ts: &str, humidity: f64) -> String {
        format!(r#"{{"device":"esp-1","temperature":21.5,"humidity":{humidity},"light":0.8,"ts":"{ts}"}}"#)
    }

    #[test]
    fn thermostat_band() {
        assert_eq!(thermostat_step("heater", 20.0, false, 25.0).map(|c| c.action), Some(Action::On));
        assert_eq!(thermostat_step("heater", 25.0, false, 25.0), None);
        assert_eq!(thermostat_step("heater", 25.0, true, 25.0), None);
        assert_eq!(thermostat_step("heater", 26.0, true, 25.0).map(|c| c.action), Some(Action::Off));
        assert_eq!(thermostat_step("heater", 24.6, false, 25.0), None);
        assert_eq!(thermostat_step("heater", 20.0, true, 25.0), None);
    }

    #[tokio::test]
    async fn ingest_splits_and_dedups() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("readings.jsonl");
        let agent = HomeAgent::new(SynonymTable::builtin()).with_journal(&path).unwrap();
        assert!(agent.query_state().readings.is_empty());

        let p = payload("2026-01-01T00:00:00Z", 40.0);
        assert_eq!(agent.ingest(&p).await.unwrap(), 3);
        assert_eq!(agent.ingest(&p).await.unwrap(), 0);
        let state = agent.query_state();
        let values: Vec<(SensorKind, f64)> = state.readings.iter().map(|r| (r.sensor, r.value)).collect();
        assert_eq!(
            values,
            [(SensorKind::Temperature, 21.5), (SensorKind::Humidity, 40.0), (SensorKind::Light, 0.8)]
        );
        assert_eq!(Journal::read(&path).unwrap().len(), 3);

        assert!(matches!(
            agent.ingest(&payload("2026-01-01T00:00:02Z", 140.0)).await,
            Err(HomeError::MalformedReading(_))
        ));
        assert!(matches!(agent.ingest("not json").await, Err(HomeError::MalformedReading(_))));
    }

    #[tokio::test]
    async fn journal_replay_restores_latest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("readings.jsonl");
        let agent = HomeAgent::new(SynonymTable::builtin()).with_journal(&path).unwrap();
        for (i, h) in [41.0, 42.0, 43.0].into_iter().enumerate() {
            agent.ingest(&payload(&format!("2026-01-01T00:00:0{i}Z"), h)).await.unwrap();
        }
        let live = agent.query_state().readings;
        assert_eq!(Journal::replay(&path).unwrap(), live);
        drop(agent);
        let reopened = HomeAgent::new(SynonymTable::builtin()).with_journal(&path).unwrap();
        assert_eq!(reopened.query_state().readings, live);
    }

    #[tokio::test]
    async fn commands_need_a_bus_and_known_objects() {
        let agent = HomeAgent::new(SynonymTable::builtin());
        let off = |object: &str| CommandMessage::new("Home", "Turn off").with_param("object", object);
        assert!(matches!(agent.handle_command(&off("the dishwasher")).await, Err(HomeError::UnknownObject(_))));
        assert!(matches!(agent.handle_command(&off("the light")).await, Err(HomeError::Bus(_))));
        assert!(matches!(
            agent.handle_command(&CommandMessage::new("Home", "Turn off")).await,
            Err(HomeError::MissingParam(_))
        ));
        assert!(matches!(agent.set_actuator("toaster", true).await, Err(HomeError::UnknownRelay(_))));
        // Failed publishes leave the actuator untouched.
        assert!(!agent.actuator("light").unwrap().on);
    }
}
