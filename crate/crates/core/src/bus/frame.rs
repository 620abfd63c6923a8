use serde::{Deserialize, Serialize};
use tokio_util::codec::LinesCodec;

use super::BusError;

/// Largest encoded frame, newline excluded.
pub const MAX_FRAME_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Op {
    Connect,
    Connack,
    Subscribe,
    Suback,
    Publish,
    Puback,
    Ping,
    Pong,
}

/// One newline-delimited JSON frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub op: Op,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub client: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl Frame {
    pub fn new(op: Op) -> Self {
        Self { op, client: String::new(), topic: None, id: None, payload: None }
    }

    pub fn connect(client: &str) -> Self {
        Self { client: client.to_string(), ..Self::new(Op::Connect) }
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = Some(id);
        self
    }

    pub fn with_topic(mut self, topic: impl Into<String>) -> Self {
        self.topic = Some(topic.into());
        self
    }

    pub fn with_payload(mut self, payload: impl Into<String>) -> Self {
        self.payload = Some(payload.into());
        self
    }

    pub fn publish(id: u64, topic: &str, payload: &str) -> Self {
        Self::new(Op::Publish).with_id(id).with_topic(topic).with_payload(payload)
    }

    /// Checks the per-op required fields.
    pub fn validate(&self) -> Result<(), BusError> {
        let missing = |field: &str| Err(BusError::Protocol(format!("{:?} frame without {field}", self.op)));
        match self.op {
            Op::Connect if self.client.is_empty() => missing("client"),
            Op::Publish if self.topic.is_none() => missing("topic"),
            Op::Publish if self.payload.is_none() => missing("payload"),
            Op::Subscribe if self.topic.is_none() => missing("topic"),
            Op::Publish | Op::Puback | Op::Subscribe | Op::Suback | Op::Ping | Op::Pong
                if self.id.is_none() =>
            {
                missing("id")
            }
            _ => Ok(()),
        }
    }

    pub fn encode(&self) -> Result<String, BusError> {
        let line = serde_json::to_string(self).map_err(|e| BusError::Protocol(e.to_string()))?;
        if line.len() > MAX_FRAME_BYTES {
            return Err(BusError::FrameTooLarge(line.len()));
        }
        Ok(line)
    }

    pub fn decode(line: &str) -> Result<Self, BusError> {
        if line.len() > MAX_FRAME_BYTES {
            return Err(BusError::FrameTooLarge(line.len()));
        }
        let frame: Frame =
            serde_json::from_str(line).map_err(|e| BusError::Protocol(format!("bad frame: {e}")))?;
        frame.validate()?;
        Ok(frame)
    }
}

pub(crate) fn codec() -> LinesCodec {
    LinesCodec::new_with_max_length(MAX_FRAME_BYTES)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_field_names() {
        let line = Frame::publish(7, "home/commands", "{}").encode().unwrap();
        assert_eq!(line, r#"{"op":"PUBLISH","topic":"home/commands","id":7,"payload":"{}"}"#);
        assert_eq!(Frame::decode(&line).unwrap(), Frame::publish(7, "home/commands", "{}"));
        let line = Frame::connect("sim").encode().unwrap();
        assert_eq!(line, r#"{"op":"CONNECT","client":"sim"}"#);
    }

    #[test]
    fn required_fields_enforced() {
        assert!(Frame::decode(r#"{"op":"PUBLISH","id":1,"payload":"x"}"#).is_err());
        assert!(Frame::decode(r#"{"op":"SUBSCRIBE","id":1}"#).is_err());
        assert!(Frame::decode(r#"{"op":"CONNECT"}"#).is_err());
        assert!(Frame::decode(r#"{"op":"PUBACK"}"#).is_err());
        assert!(Frame::decode(r#"{"op":"NOPE"}"#).is_err());
    }

    #[test]
    fn oversize_rejected() {
        let big = "x".repeat(MAX_FRAME_BYTES);
        assert!(matches!(Frame::publish(1, "t", &big).encode(), Err(BusError::FrameTooLarge(_))));
    }
}
