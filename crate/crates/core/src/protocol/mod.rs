//! Bit-exact framed binary protocol for commands and telemetry.
//!
//! See `docs/protocol.md` for the byte-level layout with worked examples.

mod frame;
mod message;
pub mod vectors;

pub use frame::{crc16, decode, encode, FrameDecoder, CRC_LEN, HEADER_LEN, MAGIC, MAX_PAYLOAD};
pub use message::{
    flags, msg_type, Command, DeviceInfo, Message, Nack, NackCode, Telemetry, TelemetryValues,
    HEAT_RANGE_MW, PID_SCALE, TELEMETRY_LEN, TEMP_RANGE_CC,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("payload of {0} bytes exceeds the 256-byte limit")]
    PayloadTooLarge(usize),
    #[error("value {value} for {field} does not fit its fixed-point field")]
    OutOfRange { field: &'static str, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("expected magic 0x53, found {found:#04x}")]
    BadMagic { found: u8 },
    #[error("bad length: declared {declared}, available {available}")]
    BadLength { declared: usize, available: usize },
    #[error("CRC mismatch: frame carries {carried:#06x}, computed {computed:#06x}")]
    BadCrc { carried: u16, computed: u16 },
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("field of message {msg_type:#04x} out of range: {value} not in [{min}, {max}]")]
    RangeViolation {
        msg_type: u8,
        value: i64,
        min: i64,
        max: i64,
    },
}

impl DecodeError {
    /// Refusal to send back when a client's frame was readable but invalid.
    pub fn to_nack(&self) -> Option<Nack> {
        match *self {
            DecodeError::RangeViolation {
                msg_type, min, max, ..
            } => Some(Nack {
                code: NackCode::RangeViolation,
                request_type: msg_type,
                min: min.clamp(i32::MIN as i64, i32::MAX as i64) as i32,
                max: max.clamp(i32::MIN as i64, i32::MAX as i64) as i32,
            }),
            DecodeError::UnknownType(t) => Some(Nack {
                code: NackCode::Malformed,
                request_type: t,
                min: 0,
                max: 0,
            }),
            _ => None,
        }
    }
}
