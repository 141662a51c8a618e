//! Coulomb-counting battery model.

use serde::{Deserialize, Serialize};

/// Pack constants. Charge is tracked in mAh against a fixed terminal voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    pub capacity_mah: f64,
    pub volts: f64,
    /// MCU and radio draw while the device is powered, W.
    pub quiescent_watts: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            capacity_mah: 850.0,
            volts: 3.7,
            quiescent_watts: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub charge_mah: f64,
    pub capacity_mah: f64,
}

impl BatteryState {
    pub fn full(params: &BatteryParams) -> Self {
        Self {
            charge_mah: params.capacity_mah,
            capacity_mah: params.capacity_mah,
        }
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.charge_mah / self.capacity_mah
    }

    pub fn is_empty(&self) -> bool {
        self.charge_mah <= 0.0
    }
}

/// Drains `power_watts` for `dt` seconds. Negative power (the module
/// generating) does not charge the pack.
pub fn step_battery(
    state: &BatteryState,
    params: &BatteryParams,
    power_watts: f64,
    dt: f64,
) -> BatteryState {
    let amps = power_watts.max(0.0) / params.volts;
    let drawn_mah = amps * dt * 1000.0 / 3600.0;
    BatteryState {
        charge_mah: (state.charge_mah - drawn_mah).clamp(0.0, state.capacity_mah),
        ..*state
    }
}
