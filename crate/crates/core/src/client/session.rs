//! Blocking client for the device service's TCP transport.
//!
//! A reader thread splits incoming frames into telemetry and replies, so
//! commands and the telemetry stream can be consumed independently.

use std::io::{Read, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::protocol::{
    encode, flags, Command, DecodeError, DeviceInfo, EncodeError, FrameDecoder, Message, Nack,
    NackCode, Telemetry,
};
use crate::trace::TraceRecord;

/// Undecodable frames tolerated before the peer is declared foreign.
pub const MISMATCH_THRESHOLD: usize = 8;
pub const REPLY_TIMEOUT: Duration = Duration::from_secs(3);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connection to {addr} refused")]
    ConnectionRefused { addr: String },
    #[error("cannot resolve {0}")]
    BadAddress(String),
    #[error("peer does not speak the device protocol ({errors} undecodable frames)")]
    ProtocolMismatch { errors: usize },
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
    #[error("connection closed")]
    Closed,
    #[error("device refused {request_type:#04x}: {code:?}, legal range [{min}, {max}]", request_type = .0.request_type, code = .0.code, min = .0.min, max = .0.max)]
    Rejected(Nack),
    #[error("unexpected reply {0:?}")]
    Unexpected(Box<Message>),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ClientError {
    pub fn is_range_violation(&self) -> bool {
        matches!(
            self,
            ClientError::Rejected(Nack {
                code: NackCode::RangeViolation,
                ..
            }) | ClientError::Encode(EncodeError::OutOfRange { .. })
        )
    }
}

enum Incoming {
    Reply(Message),
    Mismatch(usize),
}

pub struct Session {
    stream: TcpStream,
    replies: Receiver<Incoming>,
    telemetry: Receiver<Telemetry>,
    info: DeviceInfo,
    reader: Option<JoinHandle<()>>,
}

fn read_loop(
    mut stream: TcpStream,
    replies: mpsc::Sender<Incoming>,
    telemetry: mpsc::Sender<Telemetry>,
) {
    let mut decoder = FrameDecoder::new();
    let mut buf = [0u8; 4096];
    let mut errors = 0usize;
    let mut ever_valid = false;
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) | Err(_) => return,
            Ok(n) => n,
        };
        decoder.push(&buf[..n]);
        while let Some(item) = decoder.next_message() {
            match item {
                Ok(Message::Telemetry(t)) => {
                    ever_valid = true;
                    errors = 0;
                    // the receiver going away just means nobody is recording
                    let _ = telemetry.send(t);
                }
                Ok(other) => {
                    ever_valid = true;
                    errors = 0;
                    if replies.send(Incoming::Reply(other)).is_err() {
                        return;
                    }
                }
                // corrupt bytes before any valid frame, or a long run of them
                Err(DecodeError::RangeViolation { .. }) | Err(DecodeError::UnknownType(_))
                    if ever_valid => {}
                Err(_) => {
                    errors += 1;
                    if errors > MISMATCH_THRESHOLD {
                        let _ = replies.send(Incoming::Mismatch(errors));
                        return;
                    }
                }
            }
        }
    }
}

impl Session {
    /// Connects and fetches the device identity.
    pub fn connect(addr: &str) -> Result<Session, ClientError> {
        let sock = addr
            .to_socket_addrs()
            .map_err(|_| ClientError::BadAddress(addr.to_string()))?
            .next()
            .ok_or_else(|| ClientError::BadAddress(addr.to_string()))?;
        let stream =
            TcpStream::connect_timeout(&sock, REPLY_TIMEOUT).map_err(|e| match e.kind() {
                std::io::ErrorKind::ConnectionRefused => ClientError::ConnectionRefused {
                    addr: addr.to_string(),
                },
                _ => ClientError::Io(e),
            })?;
        stream.set_nodelay(true)?;
        let (reply_tx, replies) = mpsc::channel();
        let (tel_tx, telemetry) = mpsc::channel();
        let read_half = stream.try_clone()?;
        let reader = std::thread::spawn(move || read_loop(read_half, reply_tx, tel_tx));
        let mut session = Session {
            stream,
            replies,
            telemetry,
            info: DeviceInfo {
                serial: 0,
                name: String::new(),
            },
            reader: Some(reader),
        };
        session.info = match session.request(Command::GetInfo)? {
            Message::DeviceInfo(info) => info,
            other => return Err(ClientError::Unexpected(Box::new(other))),
        };
        Ok(session)
    }

    pub fn info(&self) -> &DeviceInfo {
        &self.info
    }

    fn request(&mut self, cmd: Command) -> Result<Message, ClientError> {
        self.stream.write_all(&encode(&Message::Command(cmd))?)?;
        match self.replies.recv_timeout(REPLY_TIMEOUT) {
            Ok(Incoming::Reply(Message::Nack(n))) => Err(ClientError::Rejected(n)),
            Ok(Incoming::Reply(msg)) => Ok(msg),
            Ok(Incoming::Mismatch(errors)) => Err(ClientError::ProtocolMismatch { errors }),
            Err(RecvTimeoutError::Timeout) => Err(ClientError::Timeout("reply")),
            Err(RecvTimeoutError::Disconnected) => Err(ClientError::Closed),
        }
    }

    /// Sends a command and returns the acknowledged value.
    pub fn command(&mut self, cmd: Command) -> Result<Command, ClientError> {
        match self.request(cmd)? {
            Message::Ack(applied) => Ok(applied),
            other => Err(ClientError::Unexpected(Box::new(other))),
        }
    }

    /// Latest device state. The status reply is a telemetry frame, so the
    /// next telemetry after the request is returned.
    pub fn status(&mut self) -> Result<Telemetry, ClientError> {
        while self.telemetry.try_recv().is_ok() {}
        self.stream
            .write_all(&encode(&Message::Command(Command::GetStatus))?)?;
        self.next_telemetry(REPLY_TIMEOUT)?
            .ok_or(ClientError::Timeout("status"))
    }

    pub fn next_telemetry(&mut self, timeout: Duration) -> Result<Option<Telemetry>, ClientError> {
        match self.telemetry.recv_timeout(timeout) {
            Ok(t) => Ok(Some(t)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => {
                if let Ok(Incoming::Mismatch(errors)) = self.replies.try_recv() {
                    return Err(ClientError::ProtocolMismatch { errors });
                }
                Err(ClientError::Closed)
            }
        }
    }

    /// Collects telemetry for `duration` of wall time.
    pub fn record(&mut self, duration: Duration) -> Result<Vec<TraceRecord>, ClientError> {
        while self.telemetry.try_recv().is_ok() {}
        let end = Instant::now() + duration;
        let mut out: Vec<TraceRecord> = Vec::new();
        loop {
            let left = end.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(out);
            }
            if let Some(t) = self.next_telemetry(left)? {
                let r = telemetry_record(&t);
                // a status reply can repeat the last broadcast timestamp
                if out.last().is_none_or(|prev| r.time_s > prev.time_s) {
                    out.push(r);
                }
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.stream.shutdown(Shutdown::Both);
        if let Some(reader) = self.reader.take() {
            let _ = reader.join();
        }
    }
}

/// Trace row for a telemetry frame. The contact thermistor stands in for
/// the skin column.
pub fn telemetry_record(t: &Telemetry) -> TraceRecord {
    let v = t.values();
    TraceRecord {
        time_s: v.time_s,
        t_abs_c: v.t_abs_c,
        t_emit_c: v.t_emit_c,
        t_skin_c: v.t_contact_c,
        current_a: v.current_a,
        heat_w: v.heat_w,
        setpoint: v.setpoint,
        mode: v.mode,
        saturated: v.flags & (flags::SATURATED | flags::COMPLIANCE_LIMITED) != 0,
        battery_pct: v.battery_pct,
    }
}
