//! Envelopes and their byte encoding.
//!
//! Native frames are a big-endian `u32` length followed by the JSON payload.
//! WebSocket messages carry the same JSON as one text message.

use std::fmt;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ProtocolError;
use crate::session_state::{Event, RejectReason, Role, Snapshot, EVENT_KINDS};

pub const PROTOCOL_VERSION: &str = "tutorlink/1";
/// Frames above this size are refused.
pub const MAX_FRAME_BYTES: usize = 16 * 1024 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Control,
    Pose,
    Annotation,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Control, Channel::Pose, Channel::Annotation];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Control => "control",
            Channel::Pose => "pose",
            Channel::Annotation => "annotation",
        }
    }

    /// Channel an event travels on.
    pub fn for_event(event: &Event) -> Channel {
        if event.is_pose() {
            Channel::Pose
        } else if event.is_annotation() {
            Channel::Annotation
        } else {
            Channel::Control
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sender {
    TeacherHost,
    StudentClient,
    Console,
}

impl Sender {
    pub fn as_str(self) -> &'static str {
        match self {
            Sender::TeacherHost => "teacher_host",
            Sender::StudentClient => "student_client",
            Sender::Console => "console",
        }
    }

    /// Authority role of this sender. The console acts for the teacher.
    pub fn role(self) -> Role {
        match self {
            Sender::StudentClient => Role::Student,
            Sender::TeacherHost | Sender::Console => Role::Teacher,
        }
    }

    pub fn parse(s: &str) -> Option<Sender> {
        match s {
            "teacher_host" => Some(Sender::TeacherHost),
            "student_client" => Some(Sender::StudentClient),
            "console" => Some(Sender::Console),
            _ => None,
        }
    }
}

impl fmt::Display for Sender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Key under which `SessionState::applied_seq` tracks a sender's channel.
pub fn seq_key(sender: Sender, channel: Channel) -> String {
    format!("{sender}/{channel}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ControlFrame {
    Hello {
        version: String,
    },
    Welcome {
        version: String,
        #[serde(deserialize_with = "snapshot_via_value")]
        snapshot: Snapshot,
        /// Global order number of the last event contained in the snapshot.
        horizon: u64,
    },
    Ping {
        nonce: u64,
    },
    Pong {
        nonce: u64,
    },
    Bye {
        reason: String,
    },
    /// Tells the originator where its own pose event landed in the global order.
    Ack {
        channel: Channel,
        seq: u64,
        order: u64,
    },
    Reject {
        channel: Channel,
        seq: u64,
        reason: RejectReason,
    },
}

// Tagged enums buffer their content, which loses the ability to read
// integer map keys back from JSON strings. Going through `Value` restores it.
fn snapshot_via_value<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Snapshot, D::Error> {
    let value = Value::deserialize(d)?;
    serde_json::from_value(value).map_err(serde::de::Error::custom)
}

const CONTROL_KINDS: &[&str] = &["Hello", "Welcome", "Ping", "Pong", "Bye", "Ack", "Reject"];

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Event(Event),
    Control(ControlFrame),
    /// A payload this version does not understand, kept verbatim.
    Unknown(Value),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub channel: Channel,
    pub seq: u64,
    pub sender: Sender,
    /// Global order number, set by the host on broadcast.
    pub order: Option<u64>,
    pub payload: Payload,
}

#[derive(Serialize, Deserialize)]
struct RawEnvelope {
    channel: String,
    seq: u64,
    sender: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<u64>,
    payload: Value,
}

impl Envelope {
    pub fn event(channel: Channel, seq: u64, sender: Sender, event: Event) -> Self {
        Envelope {
            channel,
            seq,
            sender,
            order: None,
            payload: Payload::Event(event),
        }
    }

    pub fn control(seq: u64, sender: Sender, frame: ControlFrame) -> Self {
        Envelope {
            channel: Channel::Control,
            seq,
            sender,
            order: None,
            payload: Payload::Control(frame),
        }
    }

    pub fn as_event(&self) -> Option<&Event> {
        match &self.payload {
            Payload::Event(e) => Some(e),
            _ => None,
        }
    }

    /// Whether the payload may travel on this envelope's channel.
    pub fn channel_is_legal(&self) -> bool {
        match &self.payload {
            Payload::Event(e) => Channel::for_event(e) == self.channel,
            Payload::Control(_) => self.channel == Channel::Control,
            Payload::Unknown(_) => true,
        }
    }

    pub fn to_value(&self) -> Value {
        let payload = match &self.payload {
            Payload::Event(e) => serde_json::json!({ "type": "event", "event": e }),
            Payload::Control(c) => serde_json::json!({ "type": "control", "frame": c }),
            Payload::Unknown(v) => v.clone(),
        };
        serde_json::to_value(RawEnvelope {
            channel: self.channel.as_str().to_owned(),
            seq: self.seq,
            sender: self.sender.as_str().to_owned(),
            order: self.order,
            payload,
        })
        .expect("envelope serializes")
    }

    /// JSON text of the envelope (the WebSocket message body).
    pub fn to_json(&self) -> String {
        self.to_value().to_string()
    }

    pub fn from_json(text: &[u8]) -> Result<Envelope, ProtocolError> {
        let value: Value =
            serde_json::from_slice(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        Envelope::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Envelope, ProtocolError> {
        let raw: RawEnvelope =
            serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        let channel = match raw.channel.as_str() {
            "control" => Channel::Control,
            "pose" => Channel::Pose,
            "annotation" => Channel::Annotation,
            other => return Err(ProtocolError::UnknownChannel(other.to_owned())),
        };
        let sender = Sender::parse(&raw.sender)
            .ok_or_else(|| ProtocolError::UnknownSender(raw.sender.clone()))?;
        Ok(Envelope {
            channel,
            seq: raw.seq,
            sender,
            order: raw.order,
            payload: decode_payload(raw.payload)?,
        })
    }
}

impl Serialize for Envelope {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Envelope {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Envelope::from_value(value).map_err(serde::de::Error::custom)
    }
}

fn decode_payload(value: Value) -> Result<Payload, ProtocolError> {
    let kind_of = |v: &Value, field: &str| -> Option<String> {
        v.get(field)?.get("kind")?.as_str().map(str::to_owned)
    };
    match value.get("type").and_then(Value::as_str) {
        Some("event") => match kind_of(&value, "event") {
            Some(k) if EVENT_KINDS.contains(&k.as_str()) => {
                serde_json::from_value(value["event"].clone())
                    .map(Payload::Event)
                    .map_err(|e| ProtocolError::Malformed(format!("{k}: {e}")))
            }
            _ => Ok(Payload::Unknown(value)),
        },
        Some("control") => match kind_of(&value, "frame") {
            Some(k) if CONTROL_KINDS.contains(&k.as_str()) => {
                serde_json::from_value(value["frame"].clone())
                    .map(Payload::Control)
                    .map_err(|e| ProtocolError::Malformed(format!("{k}: {e}")))
            }
            _ => Ok(Payload::Unknown(value)),
        },
        _ => Ok(Payload::Unknown(value)),
    }
}

/// Length-prefixed frame: `u32` big-endian byte count, then JSON.
pub fn encode(envelope: &Envelope) -> Vec<u8> {
    let body = envelope.to_json().into_bytes();
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Decodes exactly one frame; the byte count must match the prefix.
pub fn decode(bytes: &[u8]) -> Result<Envelope, ProtocolError> {
    if bytes.len() < 4 {
        return Err(ProtocolError::Framing(format!("{} bytes is shorter than the length prefix", bytes.len())));
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    let body = &bytes[4..];
    if body.len() != len {
        return Err(ProtocolError::Framing(format!(
            "prefix announces {len} bytes, frame has {}",
            body.len()
        )));
    }
    Envelope::from_json(body)
}

/// Reads one frame from a stream. `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<Envelope>, ProtocolError> {
    let mut prefix = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match reader.read(&mut prefix[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(ProtocolError::Framing("stream ended inside a length prefix".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(ProtocolError::Io(e.to_string())),
        }
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(ProtocolError::Framing(format!("frame of {len} bytes exceeds the limit")));
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            ProtocolError::Framing("stream ended inside a frame".into())
        } else {
            ProtocolError::Io(e.to_string())
        }
    })?;
    Envelope::from_json(&body).map(Some)
}

pub fn write_frame<W: Write>(writer: &mut W, envelope: &Envelope) -> io::Result<()> {
    writer.write_all(&encode(envelope))?;
    writer.flush()
}
