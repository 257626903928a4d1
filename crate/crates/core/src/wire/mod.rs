//! Framing and session choreography.
//!
//! Every message is a frame: `version (0x01) | msg_type | length (u32 BE) | body`.
//! One run is the fixed sequence
//!
//! ```text
//! client                     server
//!   HELLO      ───────────▶
//!              ◀───────────  HELLO_ACK
//!   COEFFS     ───────────▶
//!              ◀───────────  RESPONSE
//!              ◀───────────  CLOSE
//! ```
//!
//! Anything else, in either direction, ends the session with an ABORT frame
//! carrying a reason byte. The transport is assumed to be confidential
//! already; this layer adds no encryption.

mod frame;
mod message;
mod session;

use thiserror::Error;

pub use frame::{
    read_frame, write_frame, Frame, MsgType, HEADER_LEN, MAX_BODY_LEN, PROTOCOL_VERSION,
};
pub use message::{
    ciphertext_width, decode_coeffs, decode_hello, decode_hello_ack, decode_reason,
    decode_response, encode_abort, encode_close, encode_coeffs, encode_hello, encode_hello_ack,
    encode_response, Hello,
};
pub use session::{
    run_client_session, run_server_session, ClientOutcome, ClientSessionConfig, Direction,
    ServerOutcome, ServerSessionConfig, SessionError, SessionTranscript, Transport,
    DEFAULT_MAX_OPTIONS, DEFAULT_TIMEOUT,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("frame truncated")]
    Truncated,
    #[error("timed out waiting for the peer")]
    Timeout,
    #[error("unsupported protocol version {0:#04x}")]
    VersionMismatch(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownMessageType(u8),
    #[error("frame body of {0} bytes exceeds the cap")]
    Oversize(usize),
    #[error("malformed body: {0}")]
    Malformed(String),
    #[error("expected {expected:?}, got {got:?}")]
    UnexpectedMessage { expected: MsgType, got: MsgType },
    #[error("expected {expected} ciphertexts, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("ciphertext outside Z*_(n^2)")]
    InvalidCiphertext,
    #[error("i/o: {0}")]
    Io(String),
}

/// Reason byte carried by CLOSE and ABORT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    Ok,
    VersionMismatch,
    DigestMismatch,
    MalformedFrame,
    UnexpectedMessage,
    ParameterRejected,
    CountMismatch,
    Timeout,
    KeyRejected,
    Internal,
    Other(u8),
}

impl AbortReason {
    pub fn to_byte(self) -> u8 {
        match self {
            AbortReason::Ok => 0x00,
            AbortReason::VersionMismatch => 0x01,
            AbortReason::DigestMismatch => 0x02,
            AbortReason::MalformedFrame => 0x03,
            AbortReason::UnexpectedMessage => 0x04,
            AbortReason::ParameterRejected => 0x05,
            AbortReason::CountMismatch => 0x06,
            AbortReason::Timeout => 0x07,
            AbortReason::KeyRejected => 0x08,
            AbortReason::Internal => 0x09,
            AbortReason::Other(b) => b,
        }
    }

    pub fn from_byte(b: u8) -> Self {
        match b {
            0x00 => AbortReason::Ok,
            0x01 => AbortReason::VersionMismatch,
            0x02 => AbortReason::DigestMismatch,
            0x03 => AbortReason::MalformedFrame,
            0x04 => AbortReason::UnexpectedMessage,
            0x05 => AbortReason::ParameterRejected,
            0x06 => AbortReason::CountMismatch,
            0x07 => AbortReason::Timeout,
            0x08 => AbortReason::KeyRejected,
            0x09 => AbortReason::Internal,
            other => AbortReason::Other(other),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AbortReason::Ok => "OK",
            AbortReason::VersionMismatch => "VERSION_MISMATCH",
            AbortReason::DigestMismatch => "DIGEST_MISMATCH",
            AbortReason::MalformedFrame => "MALFORMED_FRAME",
            AbortReason::UnexpectedMessage => "UNEXPECTED_MESSAGE",
            AbortReason::ParameterRejected => "PARAMETER_REJECTED",
            AbortReason::CountMismatch => "COUNT_MISMATCH",
            AbortReason::Timeout => "TIMEOUT",
            AbortReason::KeyRejected => "KEY_REJECTED",
            AbortReason::Internal => "INTERNAL",
            AbortReason::Other(_) => "UNKNOWN",
        }
    }
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AbortReason::Other(b) => write!(f, "UNKNOWN({b:#04x})"),
            r => f.write_str(r.as_str()),
        }
    }
}
