//! A simulated sensor node with relays, standing in for the physical
//! microcontroller board: a first-order thermal model, drifting humidity and
//! a light level that follows the lamp relay.

mod run;

use std::collections::BTreeMap;
use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use run::{spawn, SimHandle};

use crate::home::{Action, HomeCommand, ReadingPayload};

pub const RELAYS: [&str; 4] = ["light", "heater", "computer", "air_conditioning"];
/// How much the air conditioner lowers the temperature the room settles at.
pub const AIR_CONDITIONING_OFFSET: f64 = 5.0;

const HUMIDITY_RANGE: (f64, f64) = (30.0, 60.0);
/// Humidity step per tick is uniform in ±(this × noise amplitude) %RH.
const HUMIDITY_STEP_SCALE: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub device_id: String,
    pub publish_interval: Duration,
    pub ambient_temp: f64,
    pub heated_temp: f64,
    /// Thermal time constant τ, seconds.
    pub time_constant: f64,
    pub base_light: f64,
    pub lamp_light_boost: f64,
    pub noise_amplitude: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            device_id: "esp-1".into(),
            publish_interval: Duration::from_secs(2),
            ambient_temp: 18.0,
            heated_temp: 30.0,
            time_constant: 120.0,
            base_light: 0.2,
            lamp_light_boost: 0.6,
            noise_amplitude: 0.02,
            rng_seed: 42,
        }
    }
}

impl SimConfig {
    // Negated comparisons so NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |why: &str| Err(SimError::Config(why.into()));
        if self.publish_interval.is_zero() {
            return bad("publish_interval must be positive");
        }
        if !(self.time_constant > 0.0) {
            return bad("time_constant must be positive");
        }
        if !(self.heated_temp > self.ambient_temp) {
            return bad("heated_temp must exceed ambient_temp");
        }
        if !(0.0..=1.0).contains(&self.base_light) || !(0.0..=1.0).contains(&self.lamp_light_boost) {
            return bad("light levels must be within [0, 1]");
        }
        if !(self.noise_amplitude >= 0.0) {
            return bad("noise_amplitude must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("unknown relay {0:?}")]
    UnknownRelay(String),
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("invalid simulator configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub relays: BTreeMap<String, bool>,
    pub temperature: f64,
    pub humidity: f64,
    pub light: f64,
    pub clock: DateTime<Utc>,
}

impl SimState {
    /// All relays off, room at ambient temperature.
    pub fn initial(config: &SimConfig, clock: DateTime<Utc>) -> Self {
        Self {
            relays: RELAYS.iter().map(|r| (r.to_string(), false)).collect(),
            temperature: config.ambient_temp,
            humidity: (HUMIDITY_RANGE.0 + HUMIDITY_RANGE.1) / 2.0,
            light: config.base_light,
            clock,
        }
    }

    pub fn relay(&self, id: &str) -> bool {
        self.relays.get(id).copied().unwrap_or(false)
    }

    pub fn reading(&self, device: &str) -> ReadingPayload {
        ReadingPayload {
            device: device.to_string(),
            temperature: Some(self.temperature),
            humidity: Some(self.humidity),
            light: Some(self.light),
            ts: self.clock,
            relays: Some(self.relays.clone()),
        }
    }
}

/// Temperature the room relaxes toward under the current relays.
pub fn target_temperature(state: &SimState, config: &SimConfig) -> f64 {
    let base = if state.relay("heater") { config.heated_temp } else { config.ambient_temp };
    if state.relay("air_conditioning") {
        base - AIR_CONDITIONING_OFFSET
    } else {
        base
    }
}

/// Advances the simulation by `dt` seconds.
///
/// Temperature follows `T += (dt/τ)(T_target − T)`, with the step factor
/// capped at 1 so a long step lands on the target instead of overshooting.
pub fn tick(state: &SimState, dt: f64, config: &SimConfig, rng: &mut impl Rng) -> Result<SimState, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::BadStep(dt));
    }
    let mut next = state.clone();
    let alpha = (dt / config.time_constant).min(1.0);
    next.temperature += alpha * (target_temperature(state, config) - state.temperature);

    let a = config.noise_amplitude;
    if a > 0.0 {
        let step = rng.random_range(-1.0..=1.0) * a * HUMIDITY_STEP_SCALE;
        next.humidity = (state.humidity + step).clamp(HUMIDITY_RANGE.0, HUMIDITY_RANGE.1);
    }
    next.light = light_level(&next, config, rng);
    next.clock = state.clock + chrono::Duration::microseconds((dt * 1e6).round() as i64);
    Ok(next)
}

fn light_level(state: &SimState, config: &SimConfig, rng: &mut impl Rng) -> f64 {
    let lamp = if state.relay("light") { config.lamp_light_boost } else { 0.0 };
    let a = config.noise_amplitude;
    let noise = if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
    (config.base_light + lamp + noise).clamp(0.0, 1.0)
}

/// Sets a relay. Setpoints are accepted but ignored: the thermostat runs in
/// the agent, which switches the heater relay itself.
pub fn apply_command(state: &SimState, command: &HomeCommand) -> Result<SimState, SimError> {
    if !state.relays.contains_key(&command.relay) {
        return Err(SimError::UnknownRelay(command.relay.clone()));
    }
    let mut next = state.clone();
    match command.action {
        Action::On => {
            next.relays.insert(command.relay.clone(), true);
        }
        Action::Off => {
            next.relays.insert(command.relay.clone(), false);
        }
        Action::SetSetpoint => {}
    }
    Ok(next)
}
