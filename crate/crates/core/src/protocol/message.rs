//! Message payload layouts. All multi-byte integers are little-endian.

use serde::{Deserialize, Serialize};

use super::{DecodeError, EncodeError};
use crate::control::{ControlMode, Level};

pub mod msg_type {
    pub const ENABLE: u8 = 0x01;
    pub const SET_MODE: u8 = 0x02;
    pub const SET_LEVEL: u8 = 0x03;
    pub const SET_HEAT_SETPOINT: u8 = 0x04;
    pub const SET_TEMP_SETPOINT: u8 = 0x05;
    pub const SET_PID: u8 = 0x06;
    pub const GET_STATUS: u8 = 0x07;
    pub const GET_INFO: u8 = 0x08;
    pub const TELEMETRY: u8 = 0x81;
    pub const DEVICE_INFO: u8 = 0x82;
    pub const ACK: u8 = 0x83;
    pub const NACK: u8 = 0x84;
}

/// Legal raw ranges for setpoint fields.
pub const HEAT_RANGE_MW: (i32, i32) = (-9_000, 9_000);
pub const TEMP_RANGE_CC: (i32, i32) = (1_500, 4_200);
/// Scale of the PID fixed-point fields.
pub const PID_SCALE: f64 = 1e-6;

/// Host-to-device requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Enable {
        on: bool,
    },
    SetMode {
        mode: ControlMode,
    },
    SetLevel {
        level: Level,
    },
    SetHeatSetpoint {
        milliwatts: i32,
    },
    SetTempSetpoint {
        centi_celsius: i32,
    },
    /// Gains in units of 1e-6 (A/K, A/(K s), A s/K, A).
    SetPid {
        kp: i32,
        ki: i32,
        kd: i32,
        i_limit: i32,
    },
    GetStatus,
    GetInfo,
}

impl Command {
    pub fn msg_type(&self) -> u8 {
        use msg_type::*;
        match self {
            Command::Enable { .. } => ENABLE,
            Command::SetMode { .. } => SET_MODE,
            Command::SetLevel { .. } => SET_LEVEL,
            Command::SetHeatSetpoint { .. } => SET_HEAT_SETPOINT,
            Command::SetTempSetpoint { .. } => SET_TEMP_SETPOINT,
            Command::SetPid { .. } => SET_PID,
            Command::GetStatus => GET_STATUS,
            Command::GetInfo => GET_INFO,
        }
    }

    pub fn set_pid(kp: f64, ki: f64, kd: f64, i_limit: f64) -> Result<Self, EncodeError> {
        Ok(Command::SetPid {
            kp: to_fixed("kp", kp, 1.0 / PID_SCALE)?,
            ki: to_fixed("ki", ki, 1.0 / PID_SCALE)?,
            kd: to_fixed("kd", kd, 1.0 / PID_SCALE)?,
            i_limit: to_fixed("i_limit", i_limit, 1.0 / PID_SCALE)?,
        })
    }

    pub fn set_heat(watts: f64) -> Result<Self, EncodeError> {
        Ok(Command::SetHeatSetpoint {
            milliwatts: to_fixed("milliwatts", watts, 1e3)?,
        })
    }

    pub fn set_temp(celsius: f64) -> Result<Self, EncodeError> {
        Ok(Command::SetTempSetpoint {
            centi_celsius: to_fixed("centi_celsius", celsius, 1e2)?,
        })
    }

    fn write_payload(&self, out: &mut Vec<u8>) {
        match *self {
            Command::Enable { on } => out.push(on as u8),
            Command::SetMode { mode } => out.push(mode_byte(mode)),
            Command::SetLevel { level } => out.push(level.index()),
            Command::SetHeatSetpoint { milliwatts } => out.extend(milliwatts.to_le_bytes()),
            Command::SetTempSetpoint { centi_celsius } => out.extend(centi_celsius.to_le_bytes()),
            Command::SetPid {
                kp,
                ki,
                kd,
                i_limit,
            } => {
                for v in [kp, ki, kd, i_limit] {
                    out.extend(v.to_le_bytes());
                }
            }
            Command::GetStatus | Command::GetInfo => {}
        }
    }

    fn read_payload(msg_type: u8, p: &mut Reader<'_>) -> Result<Self, DecodeError> {
        use msg_type::*;
        let cmd = match msg_type {
            ENABLE => Command::Enable {
                on: p.ranged_u8(msg_type, 0, 1)? == 1,
            },
            SET_MODE => Command::SetMode {
                mode: mode_from_byte(p.ranged_u8(msg_type, 0, 2)?),
            },
            SET_LEVEL => Command::SetLevel {
                level: Level::from_index(p.ranged_u8(msg_type, 0, 4)?).expect("range checked"),
            },
            SET_HEAT_SETPOINT => Command::SetHeatSetpoint {
                milliwatts: p.ranged_i32(msg_type, HEAT_RANGE_MW)?,
            },
            SET_TEMP_SETPOINT => Command::SetTempSetpoint {
                centi_celsius: p.ranged_i32(msg_type, TEMP_RANGE_CC)?,
            },
            SET_PID => {
                let kp = p.ranged_i32(msg_type, (0, i32::MAX))?;
                let ki = p.ranged_i32(msg_type, (0, i32::MAX))?;
                let kd = p.ranged_i32(msg_type, (0, i32::MAX))?;
                let i_limit = p.ranged_i32(msg_type, (1, i32::MAX))?;
                Command::SetPid {
                    kp,
                    ki,
                    kd,
                    i_limit,
                }
            }
            GET_STATUS => Command::GetStatus,
            GET_INFO => Command::GetInfo,
            other => return Err(DecodeError::UnknownType(other)),
        };
        Ok(cmd)
    }
}

pub mod flags {
    pub const SATURATED: u8 = 0x01;
    pub const COMPLIANCE_LIMITED: u8 = 0x02;
    pub const ENABLED: u8 = 0x04;
}

/// Periodic device state snapshot, in fixed-point wire units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Telemetry {
    pub timestamp_ms: u32,
    pub t_abs_cc: i16,
    pub t_emit_cc: i16,
    pub t_contact_cc: i16,
    pub current_ma: i16,
    pub heat_mw: i16,
    /// Milliwatts in heat-flow mode, centi-degrees C in temperature mode.
    pub setpoint_raw: i32,
    pub mode: ControlMode,
    pub flags: u8,
    pub battery_pct: u8,
}

pub const TELEMETRY_LEN: usize = 21;

/// Telemetry fields in SI / Celsius units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryValues {
    pub time_s: f64,
    pub t_abs_c: f64,
    pub t_emit_c: f64,
    pub t_contact_c: f64,
    pub current_a: f64,
    pub heat_w: f64,
    pub setpoint: f64,
    pub mode: ControlMode,
    pub flags: u8,
    pub battery_pct: f64,
}

impl Telemetry {
    pub fn from_values(v: &TelemetryValues) -> Result<Self, EncodeError> {
        let setpoint_raw = match v.mode {
            ControlMode::Off => 0,
            ControlMode::HeatFlow => to_fixed("setpoint_raw", v.setpoint, 1e3)?,
            ControlMode::Temperature => to_fixed("setpoint_raw", v.setpoint, 1e2)?,
        };
        let ms = (v.time_s * 1e3).round();
        if !(0.0..=u32::MAX as f64).contains(&ms) {
            return Err(EncodeError::OutOfRange {
                field: "timestamp_ms",
                value: v.time_s,
            });
        }
        Ok(Self {
            timestamp_ms: ms as u32,
            t_abs_cc: to_fixed16("t_abs_cc", v.t_abs_c, 1e2)?,
            t_emit_cc: to_fixed16("t_emit_cc", v.t_emit_c, 1e2)?,
            t_contact_cc: to_fixed16("t_contact_cc", v.t_contact_c, 1e2)?,
            current_ma: to_fixed16("current_ma", v.current_a, 1e3)?,
            heat_mw: to_fixed16("heat_mw", v.heat_w, 1e3)?,
            setpoint_raw,
            mode: v.mode,
            flags: v.flags,
            battery_pct: v.battery_pct.round().clamp(0.0, 100.0) as u8,
        })
    }

    pub fn values(&self) -> TelemetryValues {
        TelemetryValues {
            time_s: self.timestamp_ms as f64 * 1e-3,
            t_abs_c: self.t_abs_cc as f64 * 1e-2,
            t_emit_c: self.t_emit_cc as f64 * 1e-2,
            t_contact_c: self.t_contact_cc as f64 * 1e-2,
            current_a: self.current_ma as f64 * 1e-3,
            heat_w: self.heat_mw as f64 * 1e-3,
            setpoint: self.setpoint(),
            mode: self.mode,
            flags: self.flags,
            battery_pct: self.battery_pct as f64,
        }
    }

    /// Setpoint in W or degrees C depending on mode.
    pub fn setpoint(&self) -> f64 {
        match self.mode {
            ControlMode::Off => 0.0,
            ControlMode::HeatFlow => self.setpoint_raw as f64 * 1e-3,
            ControlMode::Temperature => self.setpoint_raw as f64 * 1e-2,
        }
    }

    pub fn enabled(&self) -> bool {
        self.flags & flags::ENABLED != 0
    }

    fn write_payload(&self, out: &mut Vec<u8>) {
        out.extend(self.timestamp_ms.to_le_bytes());
        for v in [
            self.t_abs_cc,
            self.t_emit_cc,
            self.t_contact_cc,
            self.current_ma,
            self.heat_mw,
        ] {
            out.extend(v.to_le_bytes());
        }
        out.extend(self.setpoint_raw.to_le_bytes());
        out.push(mode_byte(self.mode));
        out.push(self.flags);
        out.push(self.battery_pct);
    }

    fn read_payload(p: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let t = msg_type::TELEMETRY;
        Ok(Self {
            timestamp_ms: u32::from_le_bytes(p.take()?),
            t_abs_cc: i16::from_le_bytes(p.take()?),
            t_emit_cc: i16::from_le_bytes(p.take()?),
            t_contact_cc: i16::from_le_bytes(p.take()?),
            current_ma: i16::from_le_bytes(p.take()?),
            heat_mw: i16::from_le_bytes(p.take()?),
            setpoint_raw: i32::from_le_bytes(p.take()?),
            mode: mode_from_byte(p.ranged_u8(t, 0, 2)?),
            flags: p.ranged_u8(t, 0, 0x07)?,
            battery_pct: p.ranged_u8(t, 0, 100)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceInfo {
    pub serial: u32,
    pub name: String,
}

impl DeviceInfo {
    /// Advertised label, `"<name> XXXX"` with the serial as four hex digits.
    pub fn label(&self) -> String {
        format!("{} {:04X}", self.name, self.serial & 0xFFFF)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NackCode {
    RangeViolation = 1,
    InvalidState = 2,
    Malformed = 3,
}

/// Refusal of a command. For range violations `min`/`max` carry the legal
/// range in the raw units of the refused field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nack {
    pub code: NackCode,
    pub request_type: u8,
    pub min: i32,
    pub max: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    Command(Command),
    Telemetry(Telemetry),
    DeviceInfo(DeviceInfo),
    /// Echo of the command as applied (levels resolve to setpoints).
    Ack(Command),
    Nack(Nack),
}

impl From<Command> for Message {
    fn from(c: Command) -> Self {
        Message::Command(c)
    }
}

impl Message {
    pub(crate) fn to_payload(&self) -> Result<(u8, Vec<u8>), EncodeError> {
        let mut out = Vec::new();
        let t = match self {
            Message::Command(c) => {
                c.write_payload(&mut out);
                c.msg_type()
            }
            Message::Telemetry(t) => {
                t.write_payload(&mut out);
                msg_type::TELEMETRY
            }
            Message::DeviceInfo(info) => {
                let name = info.name.as_bytes();
                if name.len() > u8::MAX as usize {
                    return Err(EncodeError::OutOfRange {
                        field: "name",
                        value: name.len() as f64,
                    });
                }
                out.extend(info.serial.to_le_bytes());
                out.push(name.len() as u8);
                out.extend_from_slice(name);
                msg_type::DEVICE_INFO
            }
            Message::Ack(c) => {
                out.push(c.msg_type());
                c.write_payload(&mut out);
                msg_type::ACK
            }
            Message::Nack(n) => {
                out.push(n.code as u8);
                out.push(n.request_type);
                out.extend(n.min.to_le_bytes());
                out.extend(n.max.to_le_bytes());
                msg_type::NACK
            }
        };
        Ok((t, out))
    }

    pub(crate) fn from_payload(msg_type: u8, payload: &[u8]) -> Result<Self, DecodeError> {
        let mut p = Reader { bytes: payload };
        let msg = match msg_type {
            msg_type::TELEMETRY => Message::Telemetry(Telemetry::read_payload(&mut p)?),
            msg_type::DEVICE_INFO => {
                let serial = u32::from_le_bytes(p.take()?);
                let [len] = p.take::<1>()?;
                let name = p.take_slice(len as usize)?;
                let name =
                    String::from_utf8(name.to_vec()).map_err(|_| DecodeError::RangeViolation {
                        msg_type,
                        value: 0,
                        min: 0,
                        max: 0,
                    })?;
                Message::DeviceInfo(DeviceInfo { serial, name })
            }
            msg_type::ACK => {
                let [inner] = p.take::<1>()?;
                if inner & 0x80 != 0 {
                    return Err(DecodeError::UnknownType(inner));
                }
                Message::Ack(Command::read_payload(inner, &mut p)?)
            }
            msg_type::NACK => {
                let code = match p.ranged_u8(msg_type, 1, 3)? {
                    1 => NackCode::RangeViolation,
                    2 => NackCode::InvalidState,
                    _ => NackCode::Malformed,
                };
                let [request_type] = p.take::<1>()?;
                let min = i32::from_le_bytes(p.take()?);
                let max = i32::from_le_bytes(p.take()?);
                Message::Nack(Nack {
                    code,
                    request_type,
                    min,
                    max,
                })
            }
            other => Message::Command(Command::read_payload(other, &mut p)?),
        };
        p.finish()?;
        Ok(msg)
    }
}

fn mode_byte(mode: ControlMode) -> u8 {
    match mode {
        ControlMode::Off => 0,
        ControlMode::HeatFlow => 1,
        ControlMode::Temperature => 2,
    }
}

fn mode_from_byte(b: u8) -> ControlMode {
    match b {
        1 => ControlMode::HeatFlow,
        2 => ControlMode::Temperature,
        _ => ControlMode::Off,
    }
}

fn to_fixed(field: &'static str, value: f64, scale: f64) -> Result<i32, EncodeError> {
    let raw = (value * scale).round();
    if raw.is_finite() && (i32::MIN as f64..=i32::MAX as f64).contains(&raw) {
        Ok(raw as i32)
    } else {
        Err(EncodeError::OutOfRange { field, value })
    }
}

fn to_fixed16(field: &'static str, value: f64, scale: f64) -> Result<i16, EncodeError> {
    let raw = (value * scale).round();
    if raw.is_finite() && (i16::MIN as f64..=i16::MAX as f64).contains(&raw) {
        Ok(raw as i16)
    } else {
        Err(EncodeError::OutOfRange { field, value })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take_slice(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.bytes.len() < n {
            return Err(DecodeError::BadLength {
                declared: n,
                available: self.bytes.len(),
            });
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take_slice(N)?);
        Ok(out)
    }

    fn ranged_u8(&mut self, msg_type: u8, min: u8, max: u8) -> Result<u8, DecodeError> {
        let [b] = self.take::<1>()?;
        if (min..=max).contains(&b) {
            Ok(b)
        } else {
            Err(DecodeError::RangeViolation {
                msg_type,
                value: b as i64,
                min: min as i64,
                max: max as i64,
            })
        }
    }

    fn ranged_i32(&mut self, msg_type: u8, (min, max): (i32, i32)) -> Result<i32, DecodeError> {
        let v = i32::from_le_bytes(self.take()?);
        if (min..=max).contains(&v) {
            Ok(v)
        } else {
            Err(DecodeError::RangeViolation {
                msg_type,
                value: v as i64,
                min: min as i64,
                max: max as i64,
            })
        }
    }

    fn finish(self) -> Result<(), DecodeError> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(DecodeError::BadLength {
                declared: 0,
                available: self.bytes.len(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_conversion_rejects_overflow() {
        assert!(Command::set_heat(-2.0).is_ok());
        assert!(matches!(
            Command::set_heat(3e6),
            Err(EncodeError::OutOfRange {
                field: "milliwatts",
                ..
            })
        ));
        assert!(Command::set_pid(f64::NAN, 0.0, 0.0, 0.1).is_err());
        let v = TelemetryValues {
            time_s: 1.0,
            t_abs_c: 400.0,
            t_emit_c: 30.0,
            t_contact_c: 30.0,
            current_a: 0.0,
            heat_w: 0.0,
            setpoint: 0.0,
            mode: ControlMode::Off,
            flags: 0,
            battery_pct: 100.0,
        };
        assert!(matches!(
            Telemetry::from_values(&v),
            Err(EncodeError::OutOfRange {
                field: "t_abs_cc",
                ..
            })
        ));
    }

    #[test]
    fn device_label_uses_four_hex_digits() {
        let info = DeviceInfo {
            serial: 0x0F6C,
            name: "ThermoTwin".into(),
        };
        assert_eq!(info.label(), "ThermoTwin 0F6C");
    }
}
