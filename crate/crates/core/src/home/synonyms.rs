use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HomeError;
use crate::lang::normalize;

const ARTICLES: &[&str] = &["the", "a", "an"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Relay,
    Sensor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceEntry {
    pub id: String,
    pub kind: DeviceKind,
    /// Relay accepts setpoints and is driven by the thermostat.
    #[serde(default)]
    pub thermostat: bool,
    pub synonyms: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    devices: Vec<DeviceEntry>,
}

/// Maps what the user called a device to the device itself.
#[derive(Debug, Clone)]
pub struct SynonymTable {
    devices: Vec<DeviceEntry>,
    phrases: HashMap<String, usize>,
}

/// Lowercased words with articles removed, so "the Lights" and "lights" agree.
fn phrase_key(text: &str) -> String {
    text.split_whitespace()
        .map(normalize)
        .filter(|w| !w.is_empty() && !ARTICLES.contains(&w.as_str()))
        .collect::<Vec<_>>()
        .join(" ")
}

impl SynonymTable {
    pub fn new(devices: Vec<DeviceEntry>) -> Result<Self, HomeError> {
        let mut phrases = HashMap::new();
        for (i, device) in devices.iter().enumerate() {
            if devices[..i].iter().any(|d| d.id == device.id) {
                return Err(HomeError::DeviceTable(format!("duplicate device id {:?}", device.id)));
            }
            if device.thermostat && device.kind != DeviceKind::Relay {
                return Err(HomeError::DeviceTable(format!("{:?}: only relays can be thermostats", device.id)));
            }
            for phrase in device.synonyms.iter().chain([&device.id.replace('_', " ")]) {
                let key = phrase_key(phrase);
                if key.is_empty() {
                    continue;
                }
                match phrases.insert(key.clone(), i) {
                    Some(j) if j != i => {
                        return Err(HomeError::DeviceTable(format!(
                            "{key:?} names both {:?} and {:?}",
                            devices[j].id, device.id
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { devices, phrases })
    }

    pub fn parse(json: &str) -> Result<Self, HomeError> {
        let file: DeviceFile =
            serde_json::from_str(json).map_err(|e| HomeError::DeviceTable(e.to_string()))?;
        Self::new(file.devices)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HomeError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The table shipped with the agent.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../../fixtures/home/devices.json")).expect("builtin device table is valid")
    }

    pub fn lookup(&self, surface: &str) -> Option<&DeviceEntry> {
        self.phrases.get(&phrase_key(surface)).map(|&i| &self.devices[i])
    }

    pub fn device(&self, id: &str) -> Option<&DeviceEntry> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn relays(&self) -> impl Iterator<Item = &DeviceEntry> {
        self.devices.iter().filter(|d| d.kind == DeviceKind::Relay)
    }

    pub fn thermostat(&self) -> Option<&DeviceEntry> {
        self.devices.iter().find(|d| d.thermostat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lookups() {
        let table = SynonymTable::builtin();
        for (said, id) in [
            ("the light", "light"),
            ("the lights", "light"),
            ("The Lights", "light"),
            ("the computer", "computer"),
            ("air conditioning", "air_conditioning"),
            ("heater", "heater"),
        ] {
            assert_eq!(table.lookup(said).map(|d| d.id.as_str()), Some(id), "{said}");
        }
        assert!(table.lookup("the dishwasher").is_none());
        assert!(table.lookup("the").is_none());
        assert_eq!(table.thermostat().unwrap().id, "heater");
        assert_eq!(table.relays().count(), 4);
    }

    #[test]
    fn ambiguous_synonym_rejected() {
        let json = r#"{"devices":[
            {"id":"a","kind":"relay","synonyms":["lamp"]},
            {"id":"b","kind":"relay","synonyms":["the lamp"]}]}"#;
        assert!(matches!(SynonymTable::parse(json), Err(HomeError::DeviceTable(_))));
        let dup = r#"{"devices":[{"id":"a","kind":"relay","synonyms":[]},{"id":"a","kind":"relay","synonyms":[]}]}"#;
        assert!(SynonymTable::parse(dup).is_err());
    }
}
