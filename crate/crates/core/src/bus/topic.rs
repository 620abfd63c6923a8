use std::fmt;

use super::BusError;

/// An exact topic, or a prefix ending in `/#` (or a bare `#`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopicFilter {
    raw: String,
    prefix: Option<String>,
}

impl TopicFilter {
    pub fn parse(filter: &str) -> Result<Self, BusError> {
        let bad = |why: &str| Err(BusError::BadFilter(format!("{filter:?}: {why}")));
        if filter.is_empty() {
            return bad("empty filter");
        }
        if filter == "#" {
            return Ok(Self { raw: filter.into(), prefix: Some(String::new()) });
        }
        let (body, wildcard) = match filter.strip_suffix("/#") {
            Some(body) => (body, true),
            None => (filter, false),
        };
        if body.is_empty() || body.contains('#') || body.contains('+') {
            return bad("'#' is only allowed as the final segment");
        }
        let prefix = wildcard.then(|| body.to_string());
        Ok(Self { raw: filter.into(), prefix })
    }

    /// A `home/#` filter also matches `home` itself.
    pub fn matches(&self, topic: &str) -> bool {
        match &self.prefix {
            None => self.raw == topic,
            Some(p) if p.is_empty() => true,
            Some(p) => {
                topic == p || (topic.starts_with(p.as_str()) && topic.as_bytes().get(p.len()) == Some(&b'/'))
            }
        }
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }
}

impl fmt::Display for TopicFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// Publish topics are concrete: no wildcards, not empty.
pub fn validate_topic(topic: &str) -> Result<(), BusError> {
    if topic.is_empty() || topic.contains('#') || topic.contains('+') {
        return Err(BusError::BadTopic(topic.to_string()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wildcard_semantics() {
        let f = TopicFilter::parse("home/#").unwrap();
        assert!(f.matches("home/sensorData"));
        assert!(f.matches("home/a/b"));
        assert!(f.matches("home"));
        assert!(!f.matches("homework/x"));
        assert!(!f.matches("other/topic"));

        let exact = TopicFilter::parse("home/commands").unwrap();
        assert!(exact.matches("home/commands"));
        assert!(!exact.matches("home/commands/x"));

        assert!(TopicFilter::parse("#").unwrap().matches("anything/at/all"));
    }

    #[test]
    fn bad_filters() {
        for f in ["", "home/#/x", "#/home", "/#", "home/+", "home#"] {
            assert!(matches!(TopicFilter::parse(f), Err(BusError::BadFilter(_))), "{f}");
        }
        assert!(validate_topic("home/#").is_err());
        assert!(validate_topic("").is_err());
        assert!(validate_topic("home/sensorData").is_ok());
    }
}
