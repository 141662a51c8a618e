//! The two selectable control loops: analytic heat-flow and PID temperature.

mod heat;
mod pid;

pub use heat::{current_for_heat, heat_roots};
pub use pid::{pid_step, PidParams, PidState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ted::{k_to_c, TedParams};

pub const HEAT_RANGE_W: (f64, f64) = (-9.0, 9.0);
pub const TEMP_RANGE_C: (f64, f64) = (15.0, 42.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("setpoint {value} outside legal range [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },
    #[error("control mode is off; no setpoint applies")]
    ModeOff,
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("invalid PID parameter {name}: {value}")]
    InvalidGain { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    #[default]
    Off,
    HeatFlow,
    Temperature,
}

impl ControlMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlMode::Off => "off",
            ControlMode::HeatFlow => "heat_flow",
            ControlMode::Temperature => "temperature",
        }
    }
}

impl std::str::FromStr for ControlMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(ControlMode::Off),
            "heat_flow" | "heat" | "flow" => Ok(ControlMode::HeatFlow),
            "temperature" | "temp" => Ok(ControlMode::Temperature),
            other => Err(format!("unknown control mode `{other}`")),
        }
    }
}

/// Generic stimulus intensity, ordered from hottest to coldest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    VeryHot,
    Hot,
    Neutral,
    Cold,
    VeryCold,
}

impl Level {
    pub const ALL: [Level; 5] = [
        Level::VeryHot,
        Level::Hot,
        Level::Neutral,
        Level::Cold,
        Level::VeryCold,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Level> {
        Level::ALL.get(i as usize).copied()
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "very_hot" => Ok(Level::VeryHot),
            "hot" => Ok(Level::Hot),
            "neutral" => Ok(Level::Neutral),
            "cold" => Ok(Level::Cold),
            "very_cold" => Ok(Level::VeryCold),
            other => Err(format!("unknown level `{other}`")),
        }
    }
}

/// Absorbed-face heat target in watts; positive cools the skin.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HeatSetpoint(f64);

impl HeatSetpoint {
    pub fn new(watts: f64) -> Result<Self, ControlError> {
        in_range(watts, HEAT_RANGE_W).map(Self)
    }

    pub fn watts(self) -> f64 {
        self.0
    }
}

/// Contact temperature target in degrees Celsius.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TempSetpoint(f64);

impl TempSetpoint {
    pub fn new(celsius: f64) -> Result<Self, ControlError> {
        in_range(celsius, TEMP_RANGE_C).map(Self)
    }

    pub fn celsius(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HeatSetpoint {
    type Error = ControlError;

    fn try_from(watts: f64) -> Result<Self, Self::Error> {
        Self::new(watts)
    }
}

impl From<HeatSetpoint> for f64 {
    fn from(s: HeatSetpoint) -> f64 {
        s.0
    }
}

impl TryFrom<f64> for TempSetpoint {
    type Error = ControlError;

    fn try_from(celsius: f64) -> Result<Self, Self::Error> {
        Self::new(celsius)
    }
}

impl From<TempSetpoint> for f64 {
    fn from(s: TempSetpoint) -> f64 {
        s.0
    }
}

fn in_range(value: f64, (min, max): (f64, f64)) -> Result<f64, ControlError> {
    if value.is_finite() && (min..=max).contains(&value) {
        Ok(value)
    } else {
        Err(ControlError::Range { value, min, max })
    }
}

pub fn level_to_heat(level: Level) -> HeatSetpoint {
    HeatSetpoint(match level {
        Level::VeryHot => -4.0,
        Level::Hot => -2.0,
        Level::Neutral => 0.0,
        Level::Cold => 2.0,
        Level::VeryCold => 4.0,
    })
}

pub fn level_to_temp(level: Level) -> TempSetpoint {
    TempSetpoint(match level {
        Level::VeryHot => 41.0,
        Level::Hot => 38.0,
        Level::Neutral => 35.0,
        Level::Cold => 32.0,
        Level::VeryCold => 29.0,
    })
}

/// What the loop is asked to hold. Carries a setpoint only for the modes
/// that use one, so a mode/setpoint mismatch cannot be expressed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", content = "setpoint", rename_all = "snake_case")]
pub enum ControlTarget {
    #[default]
    Off,
    HeatFlow(HeatSetpoint),
    Temperature(TempSetpoint),
}

impl ControlTarget {
    pub fn mode(&self) -> ControlMode {
        match self {
            ControlTarget::Off => ControlMode::Off,
            ControlTarget::HeatFlow(_) => ControlMode::HeatFlow,
            ControlTarget::Temperature(_) => ControlMode::Temperature,
        }
    }

    /// Setpoint in its natural unit (W or degrees C); zero when off.
    pub fn value(&self) -> f64 {
        match self {
            ControlTarget::Off => 0.0,
            ControlTarget::HeatFlow(h) => h.watts(),
            ControlTarget::Temperature(t) => t.celsius(),
        }
    }

    pub fn from_level(mode: ControlMode, level: Level) -> Result<Self, ControlError> {
        match mode {
            ControlMode::Off => Err(ControlError::ModeOff),
            ControlMode::HeatFlow => Ok(ControlTarget::HeatFlow(level_to_heat(level))),
            ControlMode::Temperature => Ok(ControlTarget::Temperature(level_to_temp(level))),
        }
    }
}

/// Validates a raw setpoint for `mode`. Out-of-range values are refused,
/// never coerced.
pub fn clamp_setpoint(mode: ControlMode, raw: f64) -> Result<ControlTarget, ControlError> {
    match mode {
        ControlMode::Off => Err(ControlError::ModeOff),
        ControlMode::HeatFlow => HeatSetpoint::new(raw).map(ControlTarget::HeatFlow),
        ControlMode::Temperature => TempSetpoint::new(raw).map(ControlTarget::Temperature),
    }
}

/// Signed drive current requested by a controller.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CurrentRequest {
    pub current: f64,
    pub saturated: bool,
}

/// Sensor readings available to the controller, kelvin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    pub t_abs: f64,
    pub t_emit: f64,
    pub t_contact: f64,
}

/// One control-loop evaluation.
///
/// Temperature mode regulates the contact proxy `t_contact`. Warming the
/// skin needs negative absorbed heat, hence negative current, so the PID
/// output is negated.
pub fn controller_tick(
    target: &ControlTarget,
    measured: &Measurements,
    pid: &PidParams,
    pid_state: &mut PidState,
    ted: &TedParams,
    dt: f64,
    i_max: f64,
) -> Result<CurrentRequest, ControlError> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(ControlError::BadStep(dt));
    }
    match target {
        ControlTarget::Off => Ok(CurrentRequest::default()),
        ControlTarget::HeatFlow(q) => Ok(current_for_heat(
            ted,
            measured.t_abs,
            measured.t_emit,
            q.watts(),
            i_max,
        )),
        ControlTarget::Temperature(t) => {
            let error = t.celsius() - k_to_c(measured.t_contact);
            let out = pid_state.update(pid, error, dt, i_max)?;
            Ok(CurrentRequest {
                current: -out.current,
                saturated: out.saturated,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ted::c_to_k;

    #[test]
    fn level_tables() {
        assert_eq!(level_to_heat(Level::Hot).watts(), -2.0);
        assert_eq!(level_to_heat(Level::Neutral).watts(), 0.0);
        assert_eq!(level_to_heat(Level::VeryCold).watts(), 4.0);
        assert_eq!(level_to_temp(Level::VeryHot).celsius(), 41.0);
        assert_eq!(level_to_temp(Level::Cold).celsius(), 32.0);
        assert_eq!(level_to_temp(Level::Neutral).celsius(), 35.0);
    }

    #[test]
    fn levels_are_monotone() {
        for pair in Level::ALL.windows(2) {
            assert!(pair[0] < pair[1]);
            assert!(level_to_heat(pair[0]).watts() < level_to_heat(pair[1]).watts());
            assert!(level_to_temp(pair[0]).celsius() > level_to_temp(pair[1]).celsius());
        }
    }

    #[test]
    fn setpoint_ranges_refuse_instead_of_clamping() {
        assert_eq!(
            clamp_setpoint(ControlMode::Temperature, 50.0),
            Err(ControlError::Range {
                value: 50.0,
                min: 15.0,
                max: 42.0
            })
        );
        assert_eq!(
            clamp_setpoint(ControlMode::HeatFlow, -9.0).unwrap().value(),
            -9.0
        );
        assert!(matches!(
            clamp_setpoint(ControlMode::HeatFlow, 9.001),
            Err(ControlError::Range { min, max, .. }) if min == -9.0 && max == 9.0
        ));
        assert!(clamp_setpoint(ControlMode::Temperature, 42.0).is_ok());
        assert!(clamp_setpoint(ControlMode::Temperature, f64::NAN).is_err());
        assert_eq!(
            clamp_setpoint(ControlMode::Off, 1.0),
            Err(ControlError::ModeOff)
        );
    }

    fn at(t_c: f64) -> Measurements {
        let t = c_to_k(t_c);
        Measurements {
            t_abs: t,
            t_emit: t,
            t_contact: t,
        }
    }

    fn tick(target: ControlTarget, m: Measurements) -> CurrentRequest {
        controller_tick(
            &target,
            &m,
            &PidParams::default(),
            &mut PidState::default(),
            &TedParams::default(),
            0.01,
            0.6,
        )
        .unwrap()
    }

    #[test]
    fn tick_examples() {
        assert_eq!(tick(ControlTarget::Off, at(31.0)).current, 0.0);
        let zero_heat = ControlTarget::HeatFlow(HeatSetpoint::new(0.0).unwrap());
        assert_eq!(tick(zero_heat, at(31.0)).current, 0.0);
        let hold = ControlTarget::Temperature(TempSetpoint::new(31.0).unwrap());
        assert_eq!(tick(hold, at(31.0)).current, 0.0);
    }

    #[test]
    fn warming_request_drives_negative_current() {
        let warm = ControlTarget::Temperature(TempSetpoint::new(40.0).unwrap());
        assert!(tick(warm, at(31.0)).current < 0.0);
        let cool = ControlTarget::Temperature(TempSetpoint::new(25.0).unwrap());
        assert!(tick(cool, at(31.0)).current > 0.0);
        let hot = ControlTarget::HeatFlow(level_to_heat(Level::Hot));
        assert!(tick(hot, at(31.0)).current < 0.0);
    }
}
