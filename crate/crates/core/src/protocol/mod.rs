//! Wire protocol between the teacher host, the student client and consoles.
//!
//! The host is the single writer: it validates every envelope, applies the
//! event to its [`SessionState`](crate::session_state::SessionState), stamps a
//! global order number and fans the envelope out. Clients run a [`Replica`]
//! that applies events strictly in that order.

mod host;
mod replica;
mod throttle;
mod wire;

pub use host::{apply_envelope, HostState, IngestOutput, Outbound};
pub use replica::{Replica, ReplicaError};
pub use throttle::{PoseThrottle, DEFAULT_SEND_RATE_HZ};
pub use wire::{
    decode, encode, read_frame, seq_key, write_frame, Channel, ControlFrame, Envelope, Payload,
    Sender, MAX_FRAME_BYTES, PROTOCOL_VERSION,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("framing error: {0}")]
    Framing(String),
    #[error("malformed envelope: {0}")]
    Malformed(String),
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("unknown sender {0:?}")]
    UnknownSender(String),
    #[error("i/o error: {0}")]
    Io(String),
}
