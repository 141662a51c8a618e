//! Continuous-current driver: DAC magnitude, H-bridge polarity and the
//! supply-voltage compliance limit of the current source.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::CurrentRequest;
use crate::ted::{terminal_voltage, TedParams};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid driver parameter {name}: {value}")]
pub struct DriverError {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverParams {
    pub dac_bits: u32,
    /// Full-scale current, A.
    pub i_max: f64,
    pub supply_volts: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        Self {
            dac_bits: 8,
            i_max: 0.6,
            supply_volts: 3.7,
        }
    }
}

impl DriverParams {
    pub fn validate(&self) -> Result<(), DriverError> {
        if !(1..=16).contains(&self.dac_bits) {
            return Err(DriverError {
                name: "dac_bits",
                value: self.dac_bits as f64,
            });
        }
        for (name, value) in [("i_max", self.i_max), ("supply_volts", self.supply_volts)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(DriverError { name, value });
            }
        }
        Ok(())
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.dac_bits) - 1
    }

    /// Current step between adjacent DAC codes.
    pub fn lsb(&self) -> f64 {
        self.i_max / self.max_code() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveOutput {
    /// Delivered current, A, signed by polarity.
    pub current: f64,
    pub polarity: Polarity,
    pub code: u32,
    /// Set when the supply could not sustain the commanded current.
    pub compliance_limited: bool,
}

/// Rounds the request magnitude to the nearest DAC code (half up) and
/// carries the sign through the H-bridge.
pub fn quantize(request: &CurrentRequest, params: &DriverParams) -> DriveOutput {
    let max_code = params.max_code();
    let magnitude = if request.current.is_finite() {
        request.current.abs()
    } else {
        0.0
    };
    let code = ((magnitude / params.i_max * max_code as f64).round() as u32).min(max_code);
    let polarity = if request.current < 0.0 && code > 0 {
        Polarity::Reverse
    } else {
        Polarity::Forward
    };
    let amps = code as f64 * params.i_max / max_code as f64;
    DriveOutput {
        current: match polarity {
            Polarity::Forward => amps,
            Polarity::Reverse => -amps,
        },
        polarity,
        code,
        compliance_limited: false,
    }
}

/// Caps the current at what the supply can push through the module,
/// `|I R + alpha (T_e - T_a)| <= supply_volts`.
pub fn compliance_check(
    output: &DriveOutput,
    ted: &TedParams,
    t_abs: f64,
    t_emit: f64,
    params: &DriverParams,
) -> DriveOutput {
    let v = terminal_voltage(ted, t_abs, t_emit, output.current);
    if output.current == 0.0 || v.abs() <= params.supply_volts {
        return *output;
    }
    // feasible currents form [(-V - s)/R, (V - s)/R]; keep the drive sign
    let seebeck = ted.seebeck_alpha * (t_emit - t_abs);
    let lo = (-params.supply_volts - seebeck) / ted.resistance_ohm;
    let hi = (params.supply_volts - seebeck) / ted.resistance_ohm;
    let mut current = output.current.clamp(lo, hi);
    // the Seebeck voltage alone exceeds the rail in the drive direction:
    // the bridge cannot source this current at all, so it opens
    if current * output.current <= 0.0 || current.abs() > output.current.abs() {
        current = 0.0;
    }
    // a few ulps toward zero absorb rounding in the division above
    for _ in 0..8 {
        if current == 0.0
            || terminal_voltage(ted, t_abs, t_emit, current).abs() <= params.supply_volts
        {
            break;
        }
        current = f64::from_bits(current.to_bits() - 1);
    }
    DriveOutput {
        current,
        compliance_limited: true,
        ..*output
    }
}
