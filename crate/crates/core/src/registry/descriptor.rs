use std::collections::HashSet;
use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::RegistryError;

/// Keys reserved by the command message; parameters may not reuse them.
const RESERVED_PARAM_NAMES: [&str; 2] = ["AppName", "Intent"];

/// A third-party app as described by its descriptor file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppDescriptor {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(rename = "type")]
    pub kind: AppKind,
    /// Base URL; commands are POSTed to `<url>/command`.
    pub url: String,
    pub intents: Vec<IntentDescriptor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[non_exhaustive]
pub enum AppKind {
    RemoteApp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentDescriptor {
    pub name: String,
    #[serde(default)]
    pub samples: Vec<String>,
    #[serde(default)]
    pub key_phrases: Vec<String>,
    #[serde(default)]
    pub parameters: Vec<ParameterSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpec {
    pub name: String,
    pub data_type: DataType,
    #[serde(default)]
    pub obligatory: bool,
    #[serde(default)]
    pub question: String,
    /// Regular expression for `String` parameters; the longest free run of
    /// the utterance is captured when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataType {
    Number,
    Date,
    String,
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataType::Number => "Number",
            DataType::Date => "Date",
            DataType::String => "String",
        })
    }
}

impl ParameterSpec {
    pub fn compiled_pattern(&self) -> Option<Regex> {
        self.pattern.as_deref().and_then(|p| Regex::new(p).ok())
    }
}

impl AppDescriptor {
    pub fn intent(&self, name: &str) -> Option<&IntentDescriptor> {
        self.intents.iter().find(|i| i.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }

    /// Checks the invariants serde cannot express.
    pub fn validate(&self) -> Result<(), RegistryError> {
        let schema = |path: String, message: &str| RegistryError::SchemaViolation {
            path,
            message: message.to_string(),
        };
        if self.name.trim().is_empty() {
            return Err(schema("name".into(), "must not be empty"));
        }
        if !self
            .name
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, ' ' | '_' | '-'))
        {
            return Err(schema(
                "name".into(),
                "may contain only letters, digits, spaces, '_' and '-'",
            ));
        }
        match url::Url::parse(&self.url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") && u.host().is_some() => {}
            _ => return Err(schema("url".into(), "must be an absolute http(s) URL")),
        }
        if self.intents.is_empty() {
            return Err(schema("intents".into(), "at least one intent is required"));
        }

        let mut intent_names = HashSet::new();
        for (i, intent) in self.intents.iter().enumerate() {
            if intent.name.trim().is_empty() {
                return Err(schema(format!("intents[{i}].name"), "must not be empty"));
            }
            if !intent_names.insert(intent.name.to_lowercase()) {
                return Err(RegistryError::DuplicateIntent {
                    app: self.name.clone(),
                    intent: intent.name.clone(),
                });
            }
            if intent.samples.iter().all(|s| s.trim().is_empty())
                && intent.key_phrases.iter().all(|s| s.trim().is_empty())
            {
                return Err(RegistryError::UnreachableIntent {
                    app: self.name.clone(),
                    intent: intent.name.clone(),
                });
            }
            let mut types = HashSet::new();
            let mut names = HashSet::new();
            for (k, p) in intent.parameters.iter().enumerate() {
                let path = |field: &str| format!("intents[{i}].parameters[{k}].{field}");
                if p.name.trim().is_empty() {
                    return Err(schema(path("name"), "must not be empty"));
                }
                if RESERVED_PARAM_NAMES.contains(&p.name.as_str()) {
                    return Err(schema(path("name"), "is reserved by the command message"));
                }
                if !names.insert(p.name.as_str()) {
                    return Err(schema(path("name"), "duplicate parameter name"));
                }
                if !types.insert(p.data_type) {
                    return Err(RegistryError::TwoParamsSameType {
                        intent: intent.name.clone(),
                        data_type: p.data_type,
                    });
                }
                if p.obligatory && p.question.trim().is_empty() {
                    return Err(schema(path("question"), "obligatory parameters need a question"));
                }
                if let Some(pattern) = &p.pattern {
                    if p.data_type != DataType::String {
                        return Err(schema(path("pattern"), "only String parameters take a pattern"));
                    }
                    if let Err(e) = Regex::new(pattern) {
                        return Err(RegistryError::SchemaViolation {
                            path: path("pattern"),
                            message: e.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parses and validates a descriptor. Unknown fields are rejected and schema
/// errors carry the JSON path of the offending field.
pub fn parse_descriptor(bytes: &[u8]) -> Result<AppDescriptor, RegistryError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let descriptor: AppDescriptor =
        serde_path_to_error::deserialize(&mut de).map_err(|e| RegistryError::SchemaViolation {
            path: match e.path().to_string() {
                p if p == "." => String::new(),
                p => p,
            },
            message: e.inner().to_string(),
        })?;
    de.end().map_err(|e| RegistryError::SchemaViolation {
        path: String::new(),
        message: e.to_string(),
    })?;
    descriptor.validate()?;
    Ok(descriptor)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const HOME_LISTING: &str = r#"{
        "name": "Home",
        "description": "Home management app",
        "type": "RemoteApp",
        "url": "http://127.0.0.1:7878",
        "intents": [{
            "name": "Set temperature",
            "samples": ["Change temperature", "Set up 5 degree"],
            "key_phrases": ["set", "set up"],
            "parameters": [{
                "name": "temperature",
                "data_type": "Number",
                "obligatory": true,
                "question": "What temperature I should setup?"
            }]
        }]
    }"#;

    fn with_intents(intents: &str) -> String {
        format!(
            r#"{{"name":"App","description":"","type":"RemoteApp","url":"http://127.0.0.1:9","intents":{intents}}}"#
        )
    }

    #[test]
    fn parses_listing_descriptor() {
        let d = parse_descriptor(HOME_LISTING.as_bytes()).unwrap();
        assert_eq!(d.name, "Home");
        assert_eq!(d.kind, AppKind::RemoteApp);
        let intent = d.intent("Set temperature").unwrap();
        assert_eq!(intent.samples, ["Change temperature", "Set up 5 degree"]);
        assert_eq!(intent.key_phrases, ["set", "set up"]);
        let p = &intent.parameters[0];
        assert_eq!(p.data_type, DataType::Number);
        assert!(p.obligatory);
        assert_eq!(p.question, "What temperature I should setup?");
    }

    #[test]
    fn round_trip() {
        let d = parse_descriptor(HOME_LISTING.as_bytes()).unwrap();
        let again = parse_descriptor(d.to_json().as_bytes()).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn unreachable_intent() {
        let json = with_intents(r#"[{"name":"Ghost","samples":[],"key_phrases":[]}]"#);
        assert!(matches!(
            parse_descriptor(json.as_bytes()),
            Err(RegistryError::UnreachableIntent { intent, .. }) if intent == "Ghost"
        ));
    }

    #[test]
    fn duplicate_intent() {
        let json = with_intents(r#"[{"name":"A","samples":["x"]},{"name":"a","key_phrases":["y"]}]"#);
        assert!(matches!(
            parse_descriptor(json.as_bytes()),
            Err(RegistryError::DuplicateIntent { .. })
        ));
    }

    #[test]
    fn two_params_same_type() {
        let json = with_intents(
            r#"[{"name":"A","samples":["x"],"parameters":[
                {"name":"a","data_type":"Date"},{"name":"b","data_type":"Date"}]}]"#,
        );
        assert!(matches!(
            parse_descriptor(json.as_bytes()),
            Err(RegistryError::TwoParamsSameType { data_type: DataType::Date, .. })
        ));
    }

    #[test]
    fn schema_violations_carry_paths() {
        let json = with_intents(
            r#"[{"name":"A","samples":["x"],"parameters":[{"name":"a","data_type":"Colour"}]}]"#,
        );
        match parse_descriptor(json.as_bytes()) {
            Err(RegistryError::SchemaViolation { path, .. }) => {
                assert_eq!(path, "intents[0].parameters[0].data_type")
            }
            other => panic!("unexpected {other:?}"),
        }

        let missing_url = r#"{"name":"App","type":"RemoteApp","intents":[{"name":"A","samples":["x"]}]}"#;
        assert!(matches!(
            parse_descriptor(missing_url.as_bytes()),
            Err(RegistryError::SchemaViolation { .. })
        ));

        let unknown = HOME_LISTING.replacen("\"name\": \"Home\",", "\"name\": \"Home\", \"colour\": 1,", 1);
        match parse_descriptor(unknown.as_bytes()) {
            Err(RegistryError::SchemaViolation { message, .. }) => assert!(message.contains("colour")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_checks() {
        let bad_url = HOME_LISTING.replace("http://127.0.0.1:7878", "not a url");
        assert!(matches!(
            parse_descriptor(bad_url.as_bytes()),
            Err(RegistryError::SchemaViolation { path, .. }) if path == "url"
        ));
        let no_question = HOME_LISTING.replace("What temperature I should setup?", "");
        assert!(matches!(
            parse_descriptor(no_question.as_bytes()),
            Err(RegistryError::SchemaViolation { path, .. }) if path.ends_with("question")
        ));
        let reserved = HOME_LISTING.replace("\"temperature\",", "\"Intent\",");
        assert!(parse_descriptor(reserved.as_bytes()).is_err());
        let json = with_intents(
            r#"[{"name":"A","samples":["x"],"parameters":[{"name":"a","data_type":"Number","pattern":"x"}]}]"#,
        );
        assert!(parse_descriptor(json.as_bytes()).is_err());
        let json = with_intents(
            r#"[{"name":"A","samples":["x"],"parameters":[{"name":"a","data_type":"String","pattern":"("}]}]"#,
        );
        assert!(parse_descriptor(json.as_bytes()).is_err());
        assert!(parse_descriptor(with_intents("[]").as_bytes()).is_err());
    }
}
