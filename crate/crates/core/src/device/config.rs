//! Device configuration, loaded from TOML. Temperatures are degrees C in the
//! file and kelvin everywhere past [`DeviceConfig::network_params`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::battery::BatteryParams;
use crate::control::{ControlError, PidParams};
use crate::driver::{DriverError, DriverParams};
use crate::ted::{c_to_k, heat_flow_absorbed, TedError, TedParams, ThermalNetworkParams};

/// Level magnitude the module must reach with no gradient across it.
const FEASIBLE_HEAT_W: f64 = 4.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config field {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Ted(#[from] TedError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

/// Thermal network as written in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub c_abs: f64,
    pub c_emit: f64,
    pub c_skin: f64,
    pub r_contact: f64,
    pub r_body: f64,
    pub r_sink: f64,
    /// Open-circuit skin temperature; the body core temperature is solved from it.
    pub skin_baseline_c: f64,
    pub ambient_c: f64,
    /// Clamp the emitted face to this temperature (ideal active heat sink).
    pub fixed_emit_c: Option<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            c_abs: 2.5,
            c_emit: 20.0,
            c_skin: 20.0,
            r_contact: 8.0,
            r_body: 8.0,
            r_sink: 20.0,
            skin_baseline_c: 31.0,
            ambient_c: 23.0,
            fixed_emit_c: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Plant integration step, s.
    pub sim_dt: f64,
    pub control_hz: u32,
    pub telemetry_hz: u32,
    /// Standard deviation of additive sensor noise, K.
    pub sensor_noise_std: f64,
    /// Pace the service loop to the wall clock.
    pub realtime: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sim_dt: 0.001,
            control_hz: 100,
            telemetry_hz: 10,
            sensor_noise_std: 0.0,
            realtime: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub tcp_port: u16,
    pub ws_port: u16,
    pub serial: u32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".to_string(),
            tcp_port: 7453,
            ws_port: 7454,
            serial: 0x1A2B,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub ted: TedParams,
    pub network: NetworkConfig,
    pub driver: DriverParams,
    pub pid: PidParams,
    pub battery: BatteryParams,
    pub sim: SimConfig,
    pub service: ServiceConfig,
}

impl DeviceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: DeviceConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn network_params(&self) -> ThermalNetworkParams {
        let n = &self.network;
        let net = ThermalNetworkParams {
            c_abs: n.c_abs,
            c_emit: n.c_emit,
            c_skin: n.c_skin,
            r_contact: n.r_contact,
            r_body: n.r_body,
            r_sink: n.r_sink,
            t_core: c_to_k(n.skin_baseline_c),
            t_ambient: c_to_k(n.ambient_c),
            fixed_emit: n.fixed_emit_c.map(c_to_k),
        };
        ThermalNetworkParams::with_skin_baseline(net, &self.ted, c_to_k(n.skin_baseline_c))
    }

    /// Plant steps per control tick.
    pub fn steps_per_tick(&self) -> u32 {
        (1.0 / (self.sim.sim_dt * self.sim.control_hz as f64)).round() as u32
    }

    pub fn control_period(&self) -> f64 {
        1.0 / self.sim.control_hz as f64
    }

    /// Control ticks per telemetry frame.
    pub fn ticks_per_telemetry(&self) -> u32 {
        self.sim.control_hz / self.sim.telemetry_hz
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ted.validate()?;
        self.driver.validate()?;
        self.pid.validate()?;
        self.network_params().validate()?;

        let sim = &self.sim;
        if !(sim.sim_dt > 0.0 && sim.sim_dt <= crate::ted::MAX_STEP_S) {
            return Err(invalid(
                "sim.sim_dt",
                format!("{} not in (0, 0.01]", sim.sim_dt),
            ));
        }
        if sim.control_hz == 0 {
            return Err(invalid("sim.control_hz", "must be positive".into()));
        }
        let ratio = 1.0 / (sim.sim_dt * sim.control_hz as f64);
        if ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(invalid(
                "sim.control_hz",
                format!(
                    "control period is not a whole number of {} s steps",
                    sim.sim_dt
                ),
            ));
        }
        if sim.telemetry_hz == 0
            || sim.telemetry_hz > sim.control_hz
            || !sim.control_hz.is_multiple_of(sim.telemetry_hz)
        {
            return Err(invalid(
                "sim.telemetry_hz",
                format!(
                    "{} must divide control_hz {}",
                    sim.telemetry_hz, sim.control_hz
                ),
            ));
        }
        if !(sim.sensor_noise_std >= 0.0 && sim.sensor_noise_std.is_finite()) {
            return Err(invalid(
                "sim.sensor_noise_std",
                sim.sensor_noise_std.to_string(),
            ));
        }
        let b = &self.battery;
        for (field, value) in [
            ("battery.capacity_mah", b.capacity_mah),
            ("battery.volts", b.volts),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(field, value.to_string()));
            }
        }
        if !(b.quiescent_watts >= 0.0 && b.quiescent_watts.is_finite()) {
            return Err(invalid(
                "battery.quiescent_watts",
                b.quiescent_watts.to_string(),
            ));
        }
        self.check_feasibility()
    }

    /// The outer levels must be reachable at the skin baseline with no
    /// gradient, and full-scale current must fit under the supply.
    fn check_feasibility(&self) -> Result<(), ConfigError> {
        let t = c_to_k(self.network.skin_baseline_c);
        let i_max = self.driver.i_max;
        let cooling = crate::ted::max_cooling_heat(&self.ted, t, t, i_max).0;
        let heating = heat_flow_absorbed(&self.ted, t, t, -i_max);
        if cooling < FEASIBLE_HEAT_W || heating > -FEASIBLE_HEAT_W {
            return Err(invalid(
                "ted",
                format!(
                    "+-{FEASIBLE_HEAT_W} W not reachable at {i_max} A: range [{heating:.3}, {cooling:.3}] W"
                ),
            ));
        }
        let volts = i_max * self.ted.resistance_ohm;
        if volts > self.driver.supply_volts {
            return Err(invalid(
                "driver.supply_volts",
                format!("full-scale drive needs {volts:.3} V"),
            ));
        }
        Ok(())
    }
}

fn invalid(field: &'static str, reason: String) -> ConfigError {
    ConfigError::Invalid { field, reason }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ted::{k_to_c, PlantState};
    use approx::assert_relative_eq;

    #[test]
    fn defaults_validate() {
        let c = DeviceConfig::default();
        c.validate().unwrap();
        assert_eq!(c.steps_per_tick(), 10);
        assert_eq!(c.ticks_per_telemetry(), 10);
    }

    #[test]
    fn shipped_file_matches_defaults() {
        let text = include_str!("../../config/default.toml");
        assert_eq!(
            DeviceConfig::from_toml(text).unwrap(),
            DeviceConfig::default()
        );
    }

    #[test]
    fn toml_round_trip() {
        let c = DeviceConfig::default();
        assert_eq!(DeviceConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = DeviceConfig::from_toml("[sim]\nseed = 9\nrealtime = false\n").unwrap();
        assert_eq!(c.sim.seed, 9);
        assert_eq!(c.pid, PidParams::default());
    }

    #[test]
    fn skin_baseline_sets_open_circuit_equilibrium() {
        let c = DeviceConfig::default();
        let net = c.network_params();
        let eq = PlantState::open_circuit_equilibrium(&net, &c.ted);
        assert_relative_eq!(k_to_c(eq.t_skin), 31.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_rates() {
        let mut c = DeviceConfig::default();
        c.sim.control_hz = 300;
        assert!(matches!(
            c.validate(),
            Err(ConfigError::Invalid {
                field: "sim.control_hz",
                ..
            })
        ));
        let mut c = DeviceConfig::default();
        c.sim.telemetry_hz = 30;
        assert!(matches!(
            c.validate(),
            Err(ConfigError::Invalid {
                field: "sim.telemetry_hz",
                ..
            })
        ));
    }

    #[test]
    fn rejects_infeasible_module() {
        let mut c = DeviceConfig::default();
        c.driver.i_max = 0.3;
        assert!(matches!(
            c.validate(),
            Err(ConfigError::Invalid { field: "ted", .. })
        ));
        let mut c = DeviceConfig::default();
        c.driver.supply_volts = 3.0;
        assert!(matches!(
            c.validate(),
            Err(ConfigError::Invalid {
                field: "driver.supply_volts",
                ..
            })
        ));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(matches!(
            DeviceConfig::from_toml("[ted]\nalpha = 0.02\n"),
            Err(ConfigError::Parse(_))
        ));
    }
}
