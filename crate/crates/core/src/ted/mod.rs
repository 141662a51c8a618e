//! Thermoelectric module physics and the lumped thermal network it drives.
//!
//! Sign convention: a positive absorbed heat flow pulls heat out of the
//! skin-side face (cooling), a negative one delivers heat into it. Positive
//! current pumps heat from the absorbed face to the emitted face.
//!
//! All temperatures in this module are kelvin.

mod plant;

pub use plant::{plant_step, PlantState, ThermalNetworkParams, MAX_STEP_S};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset between the Celsius and kelvin scales.
pub const ZERO_CELSIUS_K: f64 = 273.15;

pub fn c_to_k(celsius: f64) -> f64 {
    celsius + ZERO_CELSIUS_K
}

pub fn k_to_c(kelvin: f64) -> f64 {
    kelvin - ZERO_CELSIUS_K
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TedError {
    #[error("invalid parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("time step must satisfy 0 < dt <= {max} s, got {dt}")]
    BadStep { dt: f64, max: f64 },
    #[error("plant state outside sanity envelope: {node} = {value} K")]
    OutOfEnvelope { node: &'static str, value: f64 },
}

/// Lumped electrical and thermal constants of one Peltier module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TedParams {
    /// Seebeck coefficient, V/K.
    pub seebeck_alpha: f64,
    /// Electrical resistance, ohm.
    pub resistance_ohm: f64,
    /// Face-to-face thermal resistance, K/W.
    pub theta_m: f64,
}

impl Default for TedParams {
    /// Fitted placeholders: 0.6 A into 5.8 ohm gives ~3.5 V and ~2.1 W, and
    /// +-4 W is reachable below 0.6 A with no gradient across the module.
    fn default() -> Self {
        Self {
            seebeck_alpha: 0.028,
            resistance_ohm: 5.8,
            theta_m: 12.0,
        }
    }
}

impl TedParams {
    pub fn validate(&self) -> Result<(), TedError> {
        positive("seebeck_alpha", self.seebeck_alpha)?;
        positive("resistance_ohm", self.resistance_ohm)?;
        positive("theta_m", self.theta_m)?;
        Ok(())
    }

    /// Current at the vertex of the absorbed-heat parabola.
    pub fn optimal_current(&self, t_abs: f64) -> f64 {
        self.seebeck_alpha * t_abs / self.resistance_ohm
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<(), TedError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(TedError::InvalidParam { name, value })
    }
}

/// Heat absorbed at the skin-side face:
/// `Q1 = -(R/2) I^2 + alpha T_a I + (T_a - T_e) / theta_m`.
pub fn heat_flow_absorbed(params: &TedParams, t_abs: f64, t_emit: f64, current: f64) -> f64 {
    -0.5 * params.resistance_ohm * current * current
        + params.seebeck_alpha * t_abs * current
        + (t_abs - t_emit) / params.theta_m
}

/// Electrical power drawn by the module, `I^2 R + alpha (T_e - T_a) I`.
///
/// Negative only when the module back-drives against the source.
pub fn electrical_power(params: &TedParams, t_abs: f64, t_emit: f64, current: f64) -> f64 {
    current * terminal_voltage(params, t_abs, t_emit, current)
}

/// Voltage across the module terminals for a given current.
pub fn terminal_voltage(params: &TedParams, t_abs: f64, t_emit: f64, current: f64) -> f64 {
    current * params.resistance_ohm + params.seebeck_alpha * (t_emit - t_abs)
}

/// Heat rejected at the emitted face: absorbed heat plus electrical input.
pub fn heat_flow_emitted(params: &TedParams, t_abs: f64, t_emit: f64, current: f64) -> f64 {
    heat_flow_absorbed(params, t_abs, t_emit, current)
        + electrical_power(params, t_abs, t_emit, current)
}

/// Largest absorbed heat reachable with `|I| <= i_max`.
///
/// Returns `(heat, current)` at the maximizing current.
pub fn max_cooling_heat(params: &TedParams, t_abs: f64, t_emit: f64, i_max: f64) -> (f64, f64) {
    let i_max = i_max.max(0.0);
    let current = params.optimal_current(t_abs).clamp(-i_max, i_max);
    (heat_flow_absorbed(params, t_abs, t_emit, current), current)
}
