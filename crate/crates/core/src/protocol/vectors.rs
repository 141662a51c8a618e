//! Reference frames shared with other implementations of the protocol.
//!
//! The JSON form is what `thermotwin export-vectors` writes and what
//! `testdata/frame_vectors.json` holds.

use serde::{Deserialize, Serialize};

use super::{encode, Command, DeviceInfo, Message, Nack, NackCode, Telemetry};
use crate::control::{ControlMode, Level};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameVector {
    pub name: String,
    /// Space-separated uppercase hex bytes of the whole frame.
    pub hex: String,
    /// Set for frames a decoder must reject.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02X}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn from_hex(text: &str) -> Option<Vec<u8>> {
    text.split_whitespace()
        .map(|tok| u8::from_str_radix(tok, 16).ok())
        .collect()
}

fn valid(name: &str, msg: Message) -> FrameVector {
    FrameVector {
        name: name.to_string(),
        hex: to_hex(&encode(&msg).expect("reference message encodes")),
        error: None,
    }
}

fn invalid(name: &str, bytes: Vec<u8>, error: &str) -> FrameVector {
    FrameVector {
        name: name.to_string(),
        hex: to_hex(&bytes),
        error: Some(error.to_string()),
    }
}

/// Messages paired with their vector names, in file order.
pub fn reference_messages() -> Vec<(&'static str, Message)> {
    vec![
        ("enable_on", Command::Enable { on: true }.into()),
        ("enable_off", Command::Enable { on: false }.into()),
        (
            "set_mode_heat",
            Command::SetMode {
                mode: ControlMode::HeatFlow,
            }
            .into(),
        ),
        (
            "set_mode_temp",
            Command::SetMode {
                mode: ControlMode::Temperature,
            }
            .into(),
        ),
        (
            "set_level_very_cold",
            Command::SetLevel {
                level: Level::VeryCold,
            }
            .into(),
        ),
        (
            "set_heat_hot",
            Command::SetHeatSetpoint { milliwatts: -2000 }.into(),
        ),
        (
            "set_temp_34c",
            Command::SetTempSetpoint {
                centi_celsius: 3400,
            }
            .into(),
        ),
        (
            "set_pid",
            Command::SetPid {
                kp: 150_000,
                ki: 50_000,
                kd: 0,
                i_limit: 300_000,
            }
            .into(),
        ),
        ("get_status", Command::GetStatus.into()),
        ("get_info", Command::GetInfo.into()),
        (
            "telemetry",
            Message::Telemetry(Telemetry {
                timestamp_ms: 1500,
                t_abs_cc: 3100,
                t_emit_cc: 2650,
                t_contact_cc: 3120,
                current_ma: -301,
                heat_mw: -2000,
                setpoint_raw: -2000,
                mode: ControlMode::HeatFlow,
                flags: super::flags::ENABLED,
                battery_pct: 97,
            }),
        ),
        (
            "device_info",
            Message::DeviceInfo(DeviceInfo {
                serial: 0x0000_1A2B,
                name: "ThermoTwin-SIM".into(),
            }),
        ),
        (
            "ack_set_level",
            Message::Ack(Command::SetHeatSetpoint { milliwatts: 4000 }),
        ),
        (
            "nack_temp_range",
            Message::Nack(Nack {
                code: NackCode::RangeViolation,
                request_type: super::msg_type::SET_TEMP_SETPOINT,
                min: 1500,
                max: 4200,
            }),
        ),
    ]
}

pub fn reference_vectors() -> Vec<FrameVector> {
    let mut out: Vec<FrameVector> = reference_messages()
        .into_iter()
        .map(|(name, msg)| valid(name, msg))
        .collect();

    let enable = encode(&Command::Enable { on: true }.into()).expect("encodes");
    let mut flipped = enable.clone();
    flipped[4] ^= 0x02;
    out.push(invalid("bad_crc", flipped, "BadCrc"));
    let mut magic = enable.clone();
    magic[0] = 0x54;
    out.push(invalid("bad_magic", magic, "BadMagic"));
    out.push(invalid(
        "truncated",
        enable[..enable.len() - 1].to_vec(),
        "BadLength",
    ));
    let too_hot = encode(
        &Command::SetTempSetpoint {
            centi_celsius: 5000,
        }
        .into(),
    )
    .expect("encodes");
    out.push(invalid("temp_out_of_range", too_hot, "RangeViolation"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{decode, DecodeError};

    #[test]
    fn hex_round_trip() {
        assert_eq!(from_hex("53 00 0a"), Some(vec![0x53, 0x00, 0x0A]));
        assert_eq!(from_hex("zz"), None);
        assert_eq!(to_hex(&[0x53, 0x0A]), "53 0A");
    }

    #[test]
    fn vectors_decode_as_labelled() {
        let messages = reference_messages();
        for v in reference_vectors() {
            let bytes = from_hex(&v.hex).unwrap();
            let result = decode(&bytes);
            match v.error.as_deref() {
                None => {
                    let expected = &messages.iter().find(|(n, _)| *n == v.name).unwrap().1;
                    assert_eq!(&result.unwrap(), expected, "{}", v.name);
                }
                Some(kind) => {
                    let err = result.unwrap_err();
                    let ok = match kind {
                        "BadCrc" => matches!(err, DecodeError::BadCrc { .. }),
                        "BadMagic" => matches!(err, DecodeError::BadMagic { .. }),
                        "BadLength" => matches!(err, DecodeError::BadLength { .. }),
                        "RangeViolation" => matches!(err, DecodeError::RangeViolation { .. }),
                        _ => false,
                    };
                    assert!(ok, "{}: {err:?}", v.name);
                }
            }
        }
    }
}
