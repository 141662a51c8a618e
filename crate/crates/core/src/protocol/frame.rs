//! Byte framing: `magic | len u16le | type | payload | crc16 u16le`.

use crc::{Crc, CRC_16_IBM_3740};

use super::message::Message;
use super::{DecodeError, EncodeError};

pub const MAGIC: u8 = 0x53;
pub const MAX_PAYLOAD: usize = 256;
/// Magic, length and type bytes.
pub const HEADER_LEN: usize = 4;
pub const CRC_LEN: usize = 2;

/// CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection, no xorout).
const CCITT_FALSE: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub fn crc16(bytes: &[u8]) -> u16 {
    CCITT_FALSE.checksum(bytes)
}

pub(crate) fn write_frame(msg_type: u8, payload: &[u8]) -> Result<Vec<u8>, EncodeError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(EncodeError::PayloadTooLarge(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CRC_LEN);
    out.push(MAGIC);
    out.extend_from_slice(&(payload.len() as u16).to_le_bytes());
    out.push(msg_type);
    out.extend_from_slice(payload);
    let crc = crc16(&out[3..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Serializes a message into one complete frame.
pub fn encode(message: &Message) -> Result<Vec<u8>, EncodeError> {
    let (msg_type, payload) = message.to_payload()?;
    write_frame(msg_type, &payload)
}

enum Scan {
    /// A frame occupying `len` bytes was parsed (or rejected after a valid CRC).
    Frame(Result<Message, DecodeError>, usize),
    /// Header corrupt; drop `skip` bytes and rescan.
    Corrupt(DecodeError, usize),
    /// More bytes needed.
    Incomplete,
}

fn scan(buf: &[u8]) -> Scan {
    if buf.is_empty() {
        return Scan::Incomplete;
    }
    if buf[0] != MAGIC {
        let skip = buf.iter().position(|&b| b == MAGIC).unwrap_or(buf.len());
        return Scan::Corrupt(DecodeError::BadMagic { found: buf[0] }, skip);
    }
    if buf.len() < 3 {
        return Scan::Incomplete;
    }
    let declared = u16::from_le_bytes([buf[1], buf[2]]) as usize;
    if declared > MAX_PAYLOAD {
        return Scan::Corrupt(
            DecodeError::BadLength {
                declared,
                available: buf.len().saturating_sub(HEADER_LEN + CRC_LEN),
            },
            1,
        );
    }
    let total = HEADER_LEN + declared + CRC_LEN;
    if buf.len() < total {
        return Scan::Incomplete;
    }
    let body = &buf[3..HEADER_LEN + declared];
    let carried = u16::from_le_bytes([buf[total - 2], buf[total - 1]]);
    let computed = crc16(body);
    if carried != computed {
        return Scan::Corrupt(DecodeError::BadCrc { carried, computed }, 1);
    }
    Scan::Frame(Message::from_payload(body[0], &body[1..]), total)
}

/// Decodes exactly one frame spanning all of `bytes`.
pub fn decode(bytes: &[u8]) -> Result<Message, DecodeError> {
    match scan(bytes) {
        Scan::Frame(result, used) if used == bytes.len() => result,
        Scan::Frame(_, used) => Err(DecodeError::BadLength {
            declared: used - HEADER_LEN - CRC_LEN,
            available: bytes.len().saturating_sub(HEADER_LEN + CRC_LEN),
        }),
        Scan::Corrupt(err, _) => Err(err),
        Scan::Incomplete => {
            let declared = if bytes.len() >= 3 {
                u16::from_le_bytes([bytes[1], bytes[2]]) as usize
            } else {
                0
            };
            Err(DecodeError::BadLength {
                declared,
                available: bytes.len().saturating_sub(HEADER_LEN + CRC_LEN),
            })
        }
    }
}

/// Incremental decoder for one byte stream.
///
/// Corrupt input yields an error and the decoder resynchronizes on the next
/// magic byte, so a single bad frame never poisons the stream.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next decoded message or error; `None` when more bytes are needed.
    pub fn next_message(&mut self) -> Option<Result<Message, DecodeError>> {
        match scan(&self.buf) {
            Scan::Incomplete => None,
            Scan::Frame(result, used) => {
                self.buf.drain(..used);
                Some(result)
            }
            Scan::Corrupt(err, skip) => {
                self.buf.drain(..skip.max(1));
                Some(Err(err))
            }
        }
    }

    /// Drains everything at end of stream. A dangling partial frame is
    /// reported as `BadLength` and the bytes after its magic are rescanned.
    pub fn finish(&mut self) -> Vec<Result<Message, DecodeError>> {
        let mut out = Vec::new();
        while !self.buf.is_empty() {
            match self.next_message() {
                Some(item) => out.push(item),
                None => {
                    let declared = if self.buf.len() >= 3 {
                        u16::from_le_bytes([self.buf[1], self.buf[2]]) as usize
                    } else {
                        0
                    };
                    out.push(Err(DecodeError::BadLength {
                        declared,
                        available: self.buf.len().saturating_sub(HEADER_LEN + CRC_LEN),
                    }));
                    self.buf.drain(..1);
                }
            }
        }
        out
    }
}

impl Iterator for FrameDecoder {
    type Item = Result<Message, DecodeError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_message()
    }
}
