//! Scripted hold sequences run faster than real time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::DeviceConfig;
use super::sim::{DeviceError, DeviceSim, TickRecord};
use crate::control::{ControlError, ControlTarget, HeatSetpoint, TempSetpoint};
use crate::trace::TraceRecord;

pub const STIMULUS_S: f64 = 5.0;
pub const BASELINE_S: f64 = 5.0;
pub const SKIN_BASELINE_C: f64 = 31.0;

pub const CHARAC_HEAT_W: [f64; 6] = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
pub const CHARAC_TEMP_C: [f64; 6] = [25.0, 27.0, 29.0, 34.0, 37.0, 40.0];
pub const USER_STUDY_W: [f64; 18] = [
    2.0, 0.0, -2.0, 2.0, -2.0, 2.0, 0.0, -2.0, 0.0, -2.0, 2.0, 0.0, 2.0, -2.0, 2.0, 0.0, -2.0, 0.0,
];
/// Length of the sustained very-cold run.
pub const SATURATION_S: f64 = 300.0;

pub const BUILTIN_NAMES: [&str; 4] = ["charac-heat", "charac-temp", "user-study", "saturation"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("scenario has no holds")]
    Empty,
    #[error(
        "hold {index}: duration {duration_s} s is not a positive whole number of control periods"
    )]
    BadDuration { index: usize, duration_s: f64 },
    #[error("invalid setpoint: {0}")]
    Setpoint(#[from] ControlError),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hold {
    pub duration_s: f64,
    #[serde(flatten)]
    pub target: ControlTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(rename = "hold")]
    pub holds: Vec<Hold>,
}

fn heat(watts: f64) -> Result<ControlTarget, ControlError> {
    HeatSetpoint::new(watts).map(ControlTarget::HeatFlow)
}

fn temp(celsius: f64) -> Result<ControlTarget, ControlError> {
    TempSetpoint::new(celsius).map(ControlTarget::Temperature)
}

/// Baseline, then each stimulus followed by a baseline.
fn interleaved(
    name: &str,
    baseline: ControlTarget,
    stimuli: impl IntoIterator<Item = ControlTarget>,
) -> Scenario {
    let mut holds = vec![Hold {
        duration_s: BASELINE_S,
        target: baseline,
    }];
    for target in stimuli {
        holds.push(Hold {
            duration_s: STIMULUS_S,
            target,
        });
        holds.push(Hold {
            duration_s: BASELINE_S,
            target: baseline,
        });
    }
    Scenario {
        name: name.to_string(),
        holds,
    }
}

impl Scenario {
    pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
        let s = match name {
            "charac-heat" => interleaved(
                name,
                heat(0.0)?,
                CHARAC_HEAT_W
                    .iter()
                    .map(|&w| heat(w))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            "charac-temp" => interleaved(
                name,
                temp(SKIN_BASELINE_C)?,
                CHARAC_TEMP_C
                    .iter()
                    .map(|&c| temp(c))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            "user-study" => Scenario {
                name: name.to_string(),
                holds: USER_STUDY_W
                    .iter()
                    .map(|&w| {
                        Ok(Hold {
                            duration_s: STIMULUS_S,
                            target: heat(w)?,
                        })
                    })
                    .collect::<Result<_, ControlError>>()?,
            },
            "saturation" => Scenario {
                name: name.to_string(),
                holds: vec![Hold {
                    duration_s: SATURATION_S,
                    target: ControlTarget::from_level(
                        crate::control::ControlMode::HeatFlow,
                        crate::control::Level::VeryCold,
                    )?,
                }],
            },
            other => return Err(ScenarioError::Unknown(other.to_string())),
        };
        Ok(s)
    }

    /// Parses a TOML script of `[[hold]]` tables.
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn duration_s(&self) -> f64 {
        self.holds.iter().map(|h| h.duration_s).sum()
    }

    /// Tick count of each hold, or the first offending hold.
    pub fn hold_ticks(&self, control_hz: u32) -> Result<Vec<u64>, ScenarioError> {
        if self.holds.is_empty() {
            return Err(ScenarioError::Empty);
        }
        self.holds
            .iter()
            .enumerate()
            .map(|(index, h)| {
                let ticks = h.duration_s * control_hz as f64;
                if ticks.is_finite() && ticks >= 1.0 && (ticks - ticks.round()).abs() < 1e-6 {
                    Ok(ticks.round() as u64)
                } else {
                    Err(ScenarioError::BadDuration {
                        index,
                        duration_s: h.duration_s,
                    })
                }
            })
            .collect()
    }
}

/// Runs the script from the open-circuit steady state with the loop
/// enabled. Every tick is recorded.
pub fn run_scenario_ticks(
    config: &DeviceConfig,
    scenario: &Scenario,
) -> Result<Vec<TickRecord>, ScenarioError> {
    let ticks = scenario.hold_ticks(config.sim.control_hz)?;
    let mut sim = DeviceSim::new(config.clone());
    sim.set_enabled(true);
    let mut out = Vec::with_capacity(ticks.iter().sum::<u64>() as usize);
    for (hold, n) in scenario.holds.iter().zip(ticks) {
        sim.command_target(hold.target);
        for _ in 0..n {
            out.push(*sim.tick()?);
        }
    }
    Ok(out)
}

pub fn run_scenario(
    config: &DeviceConfig,
    scenario: &Scenario,
) -> Result<Vec<TraceRecord>, ScenarioError> {
    Ok(run_scenario_ticks(config, scenario)?
        .iter()
        .map(TickRecord::trace)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_shapes() {
        let h = Scenario::builtin("charac-heat").unwrap();
        assert_eq!(h.holds.len(), 13);
        assert_eq!(h.duration_s(), 65.0);
        assert_eq!(h.holds[1].target.value(), -3.0);
        assert_eq!(h.holds[2].target.value(), 0.0);
        let t = Scenario::builtin("charac-temp").unwrap();
        assert_eq!(t.holds[0].target.value(), 31.0);
        assert_eq!(t.holds[11].target.value(), 40.0);
        let u = Scenario::builtin("user-study").unwrap();
        assert_eq!(u.holds.len(), 18);
        assert_eq!(
            Scenario::builtin("saturation").unwrap().holds[0]
                .target
                .value(),
            4.0
        );
        assert!(matches!(
            Scenario::builtin("nope"),
            Err(ScenarioError::Unknown(_))
        ));
    }

    #[test]
    fn script_parsing_validates_setpoints() {
        let ok =
            "name = \"x\"\n[[hold]]\nduration_s = 1.0\nmode = \"heat_flow\"\nsetpoint = -2.0\n\
                  [[hold]]\nduration_s = 0.5\nmode = \"off\"\n";
        let s = Scenario::from_toml(ok).unwrap();
        assert_eq!(s.holds.len(), 2);
        assert_eq!(s.holds[1].target, ControlTarget::Off);
        let bad =
            "name = \"x\"\n[[hold]]\nduration_s = 1.0\nmode = \"temperature\"\nsetpoint = 50.0\n";
        assert!(matches!(
            Scenario::from_toml(bad),
            Err(ScenarioError::Parse(_))
        ));
    }

    #[test]
    fn rejects_fractional_tick_holds_before_running() {
        let s = Scenario {
            name: "x".into(),
            holds: vec![Hold {
                duration_s: 0.005,
                target: ControlTarget::Off,
            }],
        };
        let mut c = DeviceConfig::default();
        c.sim.realtime = false;
        assert!(matches!(
            run_scenario(&c, &s),
            Err(ScenarioError::BadDuration { index: 0, .. })
        ));
        let empty = Scenario {
            name: "e".into(),
            holds: vec![],
        };
        assert_eq!(run_scenario(&c, &empty), Err(ScenarioError::Empty));
    }

    #[test]
    fn one_record_per_tick() {
        let c = DeviceConfig::default();
        let trace = run_scenario(&c, &Scenario::builtin("user-study").unwrap()).unwrap();
        assert_eq!(trace.len(), 9000);
        assert_eq!(trace[0].time_s, 0.01);
        assert_eq!(trace[8999].time_s, 90.0);
    }
}
