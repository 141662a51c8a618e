//! The simulated device: plant, controller, driver and battery advanced
//! together one control tick at a time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use super::battery::{step_battery, BatteryState};
use super::config::DeviceConfig;
use crate::control::{
    controller_tick, ControlError, ControlMode, ControlTarget, HeatSetpoint, Measurements,
    PidParams, PidState, TempSetpoint, HEAT_RANGE_W, TEMP_RANGE_C,
};
use crate::driver::{compliance_check, quantize, DriveOutput};
use crate::protocol::{
    encode, flags, Command, DecodeError, DeviceInfo, Message, Nack, NackCode, Telemetry,
    TelemetryValues, HEADER_LEN, HEAT_RANGE_MW, PID_SCALE, TEMP_RANGE_CC,
};
use crate::ted::{
    electrical_power, heat_flow_absorbed, k_to_c, plant_step, terminal_voltage, PlantState,
    TedError, ThermalNetworkParams,
};
use crate::trace::TraceRecord;

pub const DEVICE_NAME: &str = "ThermoTwin-SIM";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("plant: {0}")]
    Plant(#[from] TedError),
    #[error("controller: {0}")]
    Control(#[from] ControlError),
}

/// Everything observable about one completed control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TickRecord {
    /// Simulated time at the end of the tick, s.
    pub time_s: f64,
    /// Plant state at the end of the tick, kelvin.
    pub t_abs: f64,
    pub t_emit: f64,
    pub t_skin: f64,
    /// Current delivered during the tick, A.
    pub current: f64,
    /// Absorbed heat at the end of the tick under the delivered current, W.
    pub heat_w: f64,
    /// Electrical power and terminal voltage when the drive was applied.
    pub power_w: f64,
    pub voltage: f64,
    pub target: ControlTarget,
    pub flags: u8,
    pub battery_pct: f64,
}

impl TickRecord {
    pub fn trace(&self) -> TraceRecord {
        TraceRecord {
            time_s: self.time_s,
            t_abs_c: k_to_c(self.t_abs),
            t_emit_c: k_to_c(self.t_emit),
            t_skin_c: k_to_c(self.t_skin),
            current_a: self.current,
            heat_w: self.heat_w,
            setpoint: self.target.value(),
            mode: self.target.mode(),
            saturated: self.flags & (flags::SATURATED | flags::COMPLIANCE_LIMITED) != 0,
            battery_pct: self.battery_pct,
        }
    }

    pub fn telemetry(&self) -> Telemetry {
        // i16 fields saturate; the plant envelope keeps temperatures inside them
        let values = TelemetryValues {
            time_s: self.time_s,
            t_abs_c: k_to_c(self.t_abs).clamp(-327.0, 327.0),
            t_emit_c: k_to_c(self.t_emit).clamp(-327.0, 327.0),
            t_contact_c: k_to_c(self.t_skin).clamp(-327.0, 327.0),
            current_a: self.current.clamp(-32.0, 32.0),
            heat_w: self.heat_w.clamp(-32.0, 32.0),
            setpoint: self.target.value(),
            mode: self.target.mode(),
            flags: self.flags,
            battery_pct: self.battery_pct,
        };
        Telemetry::from_values(&values).expect("clamped values fit their fields")
    }

    pub fn enabled(&self) -> bool {
        self.flags & flags::ENABLED != 0
    }
}

/// Outcome of one command.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    /// Echo of what was applied; levels come back as the resolved setpoint.
    Ack(Command),
    Status(Telemetry),
    Info(DeviceInfo),
    Nack(Nack),
}

impl From<Reply> for Message {
    fn from(reply: Reply) -> Self {
        match reply {
            Reply::Ack(c) => Message::Ack(c),
            Reply::Nack(n) => Message::Nack(n),
            Reply::Status(t) => Message::Telemetry(t),
            Reply::Info(i) => Message::DeviceInfo(i),
        }
    }
}

/// Splits decoded input into a command to apply, or the immediate answer
/// for anything else. `Err(None)` means drop it silently.
pub fn triage(item: Result<Message, DecodeError>) -> Result<Command, Option<Message>> {
    match item {
        Ok(Message::Command(cmd)) => Ok(cmd),
        Ok(other) => Err(encode(&other).ok().map(|frame| {
            Message::Nack(Nack {
                code: NackCode::Malformed,
                request_type: frame[HEADER_LEN - 1],
                min: 0,
                max: 0,
            })
        })),
        Err(e) => Err(e.to_nack().map(Message::Nack)),
    }
}

#[derive(Debug, Clone)]
struct SensorNoise {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

#[derive(Debug, Clone)]
pub struct DeviceSim {
    config: DeviceConfig,
    net: ThermalNetworkParams,
    pid: PidParams,
    pid_state: PidState,
    target: ControlTarget,
    enabled: bool,
    plant: PlantState,
    battery: BatteryState,
    ticks: u64,
    noise: Option<SensorNoise>,
    energy_j: f64,
    last: TickRecord,
}

impl DeviceSim {
    /// Starts disabled, with the plant at its open-circuit steady state and a
    /// full battery. The config must already be validated.
    pub fn new(config: DeviceConfig) -> Self {
        let net = config.network_params();
        let plant = PlantState::open_circuit_equilibrium(&net, &config.ted);
        let battery = BatteryState::full(&config.battery);
        let noise = (config.sim.sensor_noise_std > 0.0).then(|| SensorNoise {
            rng: ChaCha8Rng::seed_from_u64(config.sim.seed),
            normal: Normal::new(0.0, config.sim.sensor_noise_std).expect("validated std"),
        });
        let mut sim = Self {
            pid: config.pid,
            net,
            pid_state: PidState::default(),
            target: ControlTarget::Off,
            enabled: false,
            plant,
            battery,
            ticks: 0,
            noise,
            energy_j: 0.0,
            last: TickRecord {
                time_s: 0.0,
                t_abs: plant.t_abs,
                t_emit: plant.t_emit,
                t_skin: plant.t_skin,
                current: 0.0,
                heat_w: 0.0,
                power_w: 0.0,
                voltage: 0.0,
                target: ControlTarget::Off,
                flags: 0,
                battery_pct: 100.0,
            },
            config,
        };
        sim.last.heat_w = heat_flow_absorbed(&sim.config.ted, plant.t_abs, plant.t_emit, 0.0);
        sim
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn plant(&self) -> &PlantState {
        &self.plant
    }

    pub fn battery(&self) -> &BatteryState {
        &self.battery
    }

    pub fn target(&self) -> ControlTarget {
        self.target
    }

    pub fn pid(&self) -> PidParams {
        self.pid
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Energy drawn from the battery so far, J.
    pub fn energy_drawn_j(&self) -> f64 {
        self.energy_j
    }

    pub fn last(&self) -> &TickRecord {
        &self.last
    }

    pub fn info(&self) -> DeviceInfo {
        DeviceInfo {
            serial: self.config.service.serial,
            name: DEVICE_NAME.to_string(),
        }
    }

    /// Replaces the plant state, e.g. to start from a uniform temperature.
    pub fn set_plant(&mut self, plant: PlantState) {
        self.plant = plant;
    }

    fn set_target(&mut self, target: ControlTarget) {
        if target.mode() != self.target.mode() {
            self.pid_state = PidState::default();
        }
        self.target = target;
    }

    /// Applies a target directly, bypassing the wire encoding.
    pub fn command_target(&mut self, target: ControlTarget) {
        self.set_target(target);
    }

    /// Powers the control loop on or off. Refuses to turn on with an empty
    /// battery.
    pub fn set_enabled(&mut self, on: bool) -> bool {
        if on && self.battery.is_empty() {
            return false;
        }
        if on != self.enabled {
            self.pid_state = PidState::default();
        }
        self.enabled = on;
        true
    }

    pub fn apply_command(&mut self, cmd: Command) -> Reply {
        match cmd {
            Command::Enable { on } => {
                if self.set_enabled(on) {
                    Reply::Ack(cmd)
                } else {
                    nack(NackCode::InvalidState, &cmd, 0, 0)
                }
            }
            Command::SetMode { mode } => {
                let target = match (mode, self.target) {
                    (ControlMode::Off, _) => ControlTarget::Off,
                    (ControlMode::HeatFlow, t @ ControlTarget::HeatFlow(_)) => t,
                    (ControlMode::HeatFlow, _) => {
                        ControlTarget::HeatFlow(HeatSetpoint::new(0.0).expect("zero is in range"))
                    }
                    (ControlMode::Temperature, t @ ControlTarget::Temperature(_)) => t,
                    (ControlMode::Temperature, _) => {
                        // hold where the contact is now
                        let here = k_to_c(self.plant.t_abs).clamp(TEMP_RANGE_C.0, TEMP_RANGE_C.1);
                        let here = (here * 100.0).round() / 100.0;
                        ControlTarget::Temperature(TempSetpoint::new(here).expect("clamped"))
                    }
                };
                self.set_target(target);
                Reply::Ack(cmd)
            }
            Command::SetLevel { level } => {
                match ControlTarget::from_level(self.target.mode(), level) {
                    Ok(target) => {
                        self.set_target(target);
                        Reply::Ack(setpoint_command(target))
                    }
                    Err(_) => nack(NackCode::InvalidState, &cmd, 0, 0),
                }
            }
            Command::SetHeatSetpoint { milliwatts } => {
                match HeatSetpoint::new(milliwatts as f64 * 1e-3) {
                    Ok(sp) => {
                        self.set_target(ControlTarget::HeatFlow(sp));
                        Reply::Ack(cmd)
                    }
                    Err(_) => nack(
                        NackCode::RangeViolation,
                        &cmd,
                        HEAT_RANGE_MW.0,
                        HEAT_RANGE_MW.1,
                    ),
                }
            }
            Command::SetTempSetpoint { centi_celsius } => {
                match TempSetpoint::new(centi_celsius as f64 * 1e-2) {
                    Ok(sp) => {
                        self.set_target(ControlTarget::Temperature(sp));
                        Reply::Ack(cmd)
                    }
                    Err(_) => nack(
                        NackCode::RangeViolation,
                        &cmd,
                        TEMP_RANGE_CC.0,
                        TEMP_RANGE_CC.1,
                    ),
                }
            }
            Command::SetPid {
                kp,
                ki,
                kd,
                i_limit,
            } => {
                let pid = PidParams {
                    kp: kp as f64 * PID_SCALE,
                    ki: ki as f64 * PID_SCALE,
                    kd: kd as f64 * PID_SCALE,
                    i_limit: i_limit as f64 * PID_SCALE,
                };
                if pid.validate().is_err() || kp < 0 || ki < 0 || kd < 0 || i_limit < 1 {
                    return nack(NackCode::RangeViolation, &cmd, 0, i32::MAX);
                }
                self.pid = pid;
                self.pid_state.integral = self.pid_state.integral.clamp(-pid.i_limit, pid.i_limit);
                Reply::Ack(cmd)
            }
            Command::GetStatus => Reply::Status(self.last.telemetry()),
            Command::GetInfo => Reply::Info(self.info()),
        }
    }

    fn measure(&mut self) -> Measurements {
        let p = self.plant;
        match &mut self.noise {
            None => Measurements {
                t_abs: p.t_abs,
                t_emit: p.t_emit,
                t_contact: p.t_abs,
            },
            Some(n) => {
                let t_abs = p.t_abs + n.normal.sample(&mut n.rng);
                let t_emit = p.t_emit + n.normal.sample(&mut n.rng);
                Measurements {
                    t_abs,
                    t_emit,
                    t_contact: t_abs,
                }
            }
        }
    }

    /// Runs one control period: sense, control, drive, then integrate the
    /// plant and battery over the period.
    pub fn tick(&mut self) -> Result<&TickRecord, DeviceError> {
        let period = self.config.control_period();
        let ted = self.config.ted;
        let driver = self.config.driver;
        let battery = self.config.battery;
        let control_hz = self.config.sim.control_hz;
        let dt = self.config.sim.sim_dt;
        let steps = self.config.steps_per_tick();

        let mut saturated = false;
        let drive = if self.enabled {
            let measured = self.measure();
            let request = controller_tick(
                &self.target,
                &measured,
                &self.pid,
                &mut self.pid_state,
                &ted,
                period,
                driver.i_max,
            )?;
            saturated = request.saturated;
            let quantized = quantize(&request, &driver);
            compliance_check(
                &quantized,
                &ted,
                self.plant.t_abs,
                self.plant.t_emit,
                &driver,
            )
        } else {
            DriveOutput {
                current: 0.0,
                polarity: crate::driver::Polarity::Forward,
                code: 0,
                compliance_limited: false,
            }
        };

        let start = self.plant;
        let power_w = electrical_power(&ted, start.t_abs, start.t_emit, drive.current);
        let voltage = terminal_voltage(&ted, start.t_abs, start.t_emit, drive.current);

        let mut plant = start;
        for _ in 0..steps {
            let drawn = electrical_power(&ted, plant.t_abs, plant.t_emit, drive.current).max(0.0)
                + battery.quiescent_watts;
            let before = self.battery.charge_mah;
            self.battery = step_battery(&self.battery, &battery, drawn, dt);
            self.energy_j += (before - self.battery.charge_mah) * 3.6 * battery.volts;
            plant = plant_step(&plant, &self.net, &ted, drive.current, dt)?;
        }
        self.ticks += 1;
        // derive time from the tick count so it never accumulates rounding
        plant.sim_time = self.ticks as f64 / control_hz as f64;
        self.plant = plant;

        if self.battery.is_empty() {
            self.enabled = false;
        }

        let mut f = 0;
        if saturated {
            f |= flags::SATURATED;
        }
        if drive.compliance_limited {
            f |= flags::COMPLIANCE_LIMITED;
        }
        if self.enabled {
            f |= flags::ENABLED;
        }
        self.last = TickRecord {
            time_s: plant.sim_time,
            t_abs: plant.t_abs,
            t_emit: plant.t_emit,
            t_skin: plant.t_skin,
            current: drive.current,
            heat_w: heat_flow_absorbed(&ted, plant.t_abs, plant.t_emit, drive.current),
            power_w,
            voltage,
            target: self.target,
            flags: f,
            battery_pct: self.battery.percent(),
        };
        Ok(&self.last)
    }

    pub fn telemetry(&self) -> Telemetry {
        self.last.telemetry()
    }

    /// Answer to one decoded frame, applied in place.
    pub fn handle(&mut self, item: Result<Message, DecodeError>) -> Option<Message> {
        match triage(item) {
            Ok(cmd) => Some(self.apply_command(cmd).into()),
            Err(answer) => answer,
        }
    }
}

fn setpoint_command(target: ControlTarget) -> Command {
    match target {
        ControlTarget::HeatFlow(h) => Command::SetHeatSetpoint {
            milliwatts: (h.watts() * 1e3).round() as i32,
        },
        ControlTarget::Temperature(t) => Command::SetTempSetpoint {
            centi_celsius: (t.celsius() * 1e2).round() as i32,
        },
        ControlTarget::Off => Command::SetMode {
            mode: ControlMode::Off,
        },
    }
}

fn nack(code: NackCode, cmd: &Command, min: i32, max: i32) -> Reply {
    Reply::Nack(Nack {
        code,
        request_type: cmd.msg_type(),
        min,
        max,
    })
}

// keep the wire ranges in step with the control ranges
const _: () = {
    assert!(HEAT_RANGE_MW.0 == (HEAT_RANGE_W.0 * 1e3) as i32);
    assert!(HEAT_RANGE_MW.1 == (HEAT_RANGE_W.1 * 1e3) as i32);
    assert!(TEMP_RANGE_CC.0 == (TEMP_RANGE_C.0 * 1e2) as i32);
    assert!(TEMP_RANGE_CC.1 == (TEMP_RANGE_C.1 * 1e2) as i32);
};
