use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Command sent to an app: a flat JSON object with `"AppName"`, `"Intent"`,
/// then one string entry per filled parameter in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandMessage {
    pub app_name: String,
    pub intent: String,
    pub params: Vec<(String, String)>,
}

impl CommandMessage {
    pub fn new(app_name: impl Into<String>, intent: impl Into<String>) -> Self {
        Self { app_name: app_name.into(), intent: intent.into(), params: Vec::new() }
    }

    pub fn with_param(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.push((name.into(), value.into()));
        self
    }

    pub fn param(&self, name: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

/// Wire encoding of a command.
pub fn encode(command: &CommandMessage) -> Vec<u8> {
    serde_json::to_vec(command).expect("command serializes")
}

pub fn decode(bytes: &[u8]) -> Result<CommandMessage, serde_json::Error> {
    serde_json::from_slice(bytes)
}

impl Serialize for CommandMessage {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(2 + self.params.len()))?;
        map.serialize_entry("AppName", &self.app_name)?;
        map.serialize_entry("Intent", &self.intent)?;
        for (k, v) in &self.params {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for CommandMessage {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CommandVisitor;

        impl<'de> Visitor<'de> for CommandVisitor {
            type Value = CommandMessage;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a flat JSON object with string values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<CommandMessage, A::Error> {
                let mut app_name = None;
                let mut intent = None;
                let mut params: Vec<(String, String)> = Vec::new();
                while let Some((key, value)) = map.next_entry::<String, String>()? {
                    match key.as_str() {
                        "AppName" if app_name.is_none() => app_name = Some(value),
                        "Intent" if intent.is_none() => intent = Some(value),
                        "AppName" | "Intent" => return Err(de::Error::duplicate_field("AppName/Intent")),
                        _ if params.iter().any(|(k, _)| *k == key) => {
                            return Err(de::Error::custom(format!("duplicate parameter {key:?}")))
                        }
                        _ => params.push((key, value)),
                    }
                }
                Ok(CommandMessage {
                    app_name: app_name.ok_or_else(|| de::Error::missing_field("AppName"))?,
                    intent: intent.ok_or_else(|| de::Error::missing_field("Intent"))?,
                    params,
                })
            }
        }

        deserializer.deserialize_map(CommandVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::{json, Value};

    fn as_value(cmd: &CommandMessage) -> Value {
        serde_json::from_slice(&encode(cmd)).unwrap()
    }

    #[test]
    fn turn_off_the_computer() {
        let cmd = CommandMessage::new("Home", "Turn off").with_param("object", "the computer");
        assert_eq!(
            String::from_utf8(encode(&cmd)).unwrap(),
            r#"{"AppName":"Home","Intent":"Turn off","object":"the computer"}"#
        );
    }

    #[test]
    fn reminder_with_date() {
        let cmd = CommandMessage::new("Calendar", "Create remind")
            .with_param("Subject", "meet Sasha")
            .with_param("Date", "16th of November");
        assert_eq!(
            as_value(&cmd),
            json!({"AppName": "Calendar", "Intent":"Create remind", "Subject": "meet Sasha", "Date": "16th of November"})
        );
    }

    #[test]
    fn air_conditioning() {
        let cmd = CommandMessage::new("Home", "Turn off").with_param("object", "air conditioning");
        assert_eq!(
            as_value(&cmd),
            json!({"AppName": "Home", "Intent":"Turn off", "object": "air conditioning"})
        );
    }

    #[test]
    fn decode_round_trip_and_errors() {
        let cmd = CommandMessage::new("Home", "Set temperature").with_param("temperature", "25");
        assert_eq!(decode(&encode(&cmd)).unwrap(), cmd);
        assert!(decode(br#"{"Intent":"x"}"#).is_err());
        assert!(decode(br#"{"AppName":"a","Intent":"x","n":5}"#).is_err());
        assert!(decode(br#"{"AppName":"a","Intent":"x","n":"1","n":"2"}"#).is_err());
        assert!(decode(b"[]").is_err());
    }
}
