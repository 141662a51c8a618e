use serde::{Deserialize, Serialize};

use super::{ControlError, CurrentRequest};

/// PID gains acting on a temperature error, producing amperes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidParams {
    /// A/K
    pub kp: f64,
    /// A/(K s)
    pub ki: f64,
    /// A s/K
    pub kd: f64,
    /// Clamp on the integral contribution, A.
    pub i_limit: f64,
}

impl Default for PidParams {
    /// Calibrated against the default plant for a contact slew of roughly
    /// 2.25 C/s on the characterization steps.
    fn default() -> Self {
        Self {
            kp: 2.0,
            ki: 0.5,
            kd: 0.0,
            i_limit: 0.3,
        }
    }
}

impl PidParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ControlError::InvalidGain { name, value: v });
            }
        }
        if !(self.i_limit.is_finite() && self.i_limit > 0.0) {
            return Err(ControlError::InvalidGain {
                name: "i_limit",
                value: self.i_limit,
            });
        }
        Ok(())
    }
}

/// Memory carried between PID ticks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

/// One PID update with conditional anti-windup.
///
/// Returns the clamped output and the next integral value. The integral
/// is frozen while the output saturates in the direction of the error.
pub fn pid_step(
    pid: &PidParams,
    error: f64,
    prev_error: f64,
    integral: f64,
    dt: f64,
    i_max: f64,
) -> Result<(CurrentRequest, f64), ControlError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ControlError::BadStep(dt));
    }
    let candidate = (integral + pid.ki * error * dt).clamp(-pid.i_limit, pid.i_limit);
    let u = pid.kp * error + candidate + pid.kd * (error - prev_error) / dt;
    let saturated = u.abs() > i_max;
    let next_integral = if saturated && u * error > 0.0 {
        integral.clamp(-pid.i_limit, pid.i_limit)
    } else {
        candidate
    };
    Ok((
        CurrentRequest {
            current: u.clamp(-i_max, i_max),
            saturated,
        },
        next_integral,
    ))
}

impl PidState {
    /// Runs [`pid_step`] and advances this state. The first call after a
    /// reset uses the current error as the previous one (no derivative kick).
    pub fn update(
        &mut self,
        pid: &PidParams,
        error: f64,
        dt: f64,
        i_max: f64,
    ) -> Result<CurrentRequest, ControlError> {
        let prev = self.prev_error.unwrap_or(error);
        let (req, integral) = pid_step(pid, error, prev, self.integral, dt, i_max)?;
        self.integral = integral;
        self.prev_error = Some(error);
        Ok(req)
    }
}
