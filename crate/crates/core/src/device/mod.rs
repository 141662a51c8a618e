//! The emulated device: configuration, battery, the tick loop, scripted
//! scenarios and the network service around them.

mod battery;
mod config;
mod scenario;
pub mod service;
mod sim;

pub use battery::{step_battery, BatteryParams, BatteryState};
pub use config::{ConfigError, DeviceConfig, NetworkConfig, ServiceConfig, SimConfig};
pub use scenario::{
    run_scenario, run_scenario_ticks, Hold, Scenario, ScenarioError, BASELINE_S, BUILTIN_NAMES,
    CHARAC_HEAT_W, CHARAC_TEMP_C, SATURATION_S, SKIN_BASELINE_C, STIMULUS_S, USER_STUDY_W,
};
pub use sim::{triage, DeviceError, DeviceSim, Reply, TickRecord, DEVICE_NAME};
