use serde::{Deserialize, Serialize};

use super::{c_to_k, heat_flow_absorbed, heat_flow_emitted, positive, TedError, TedParams};

/// Largest integration step accepted by [`plant_step`].
pub const MAX_STEP_S: f64 = 0.01;

const ENVELOPE_K: (f64, f64) = (250.0, 400.0);
const BOUNDARY_K: (f64, f64) = (273.15, 323.15);

/// Three-node network: absorbed face, skin under it, emitted face.
///
/// The skin couples to the body core through `r_body` and the emitted face
/// to ambient air through the heat sink `r_sink`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalNetworkParams {
    pub c_abs: f64,
    pub c_emit: f64,
    pub c_skin: f64,
    pub r_contact: f64,
    pub r_body: f64,
    pub r_sink: f64,
    pub t_core: f64,
    pub t_ambient: f64,
    /// Holds the emitted face at a fixed temperature (ideal active sink).
    #[serde(default)]
    pub fixed_emit: Option<f64>,
}

impl Default for ThermalNetworkParams {
    /// Fitted, not measured: skin at 31 C open-circuit, a passive wearable
    /// heat sink, and a contact slew near 2.25 C/s under the default PID.
    fn default() -> Self {
        Self::with_skin_baseline(
            ThermalNetworkParams {
                c_abs: 2.5,
                c_emit: 20.0,
                c_skin: 20.0,
                r_contact: 8.0,
                r_body: 8.0,
                r_sink: 20.0,
                t_core: c_to_k(31.0),
                t_ambient: c_to_k(23.0),
                fixed_emit: None,
            },
            &TedParams::default(),
            c_to_k(31.0),
        )
    }
}

impl ThermalNetworkParams {
    /// Returns `net` with `t_core` chosen so the open-circuit skin
    /// temperature settles at `t_skin`.
    pub fn with_skin_baseline(mut net: Self, ted: &TedParams, t_skin: f64) -> Self {
        let r_total = net.series_resistance(ted);
        let t_cold = net.cold_boundary();
        net.t_core = (t_skin * r_total - t_cold * net.r_body) / (r_total - net.r_body);
        net
    }

    pub fn validate(&self) -> Result<(), TedError> {
        positive("c_abs", self.c_abs)?;
        positive("c_emit", self.c_emit)?;
        positive("c_skin", self.c_skin)?;
        positive("r_contact", self.r_contact)?;
        positive("r_body", self.r_body)?;
        positive("r_sink", self.r_sink)?;
        for (name, value) in [("t_core", self.t_core), ("t_ambient", self.t_ambient)] {
            if !(BOUNDARY_K.0..=BOUNDARY_K.1).contains(&value) {
                return Err(TedError::InvalidParam { name, value });
            }
        }
        if let Some(value) = self.fixed_emit {
            if !(ENVELOPE_K.0..=ENVELOPE_K.1).contains(&value) {
                return Err(TedError::InvalidParam {
                    name: "fixed_emit",
                    value,
                });
            }
        }
        Ok(())
    }

    fn cold_boundary(&self) -> f64 {
        self.fixed_emit.unwrap_or(self.t_ambient)
    }

    fn series_resistance(&self, ted: &TedParams) -> f64 {
        let sink = if self.fixed_emit.is_some() {
            0.0
        } else {
            self.r_sink
        };
        self.r_body + self.r_contact + ted.theta_m + sink
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub t_abs: f64,
    pub t_emit: f64,
    pub t_skin: f64,
    pub sim_time: f64,
}

impl PlantState {
    pub fn uniform(t: f64) -> Self {
        Self {
            t_abs: t,
            t_emit: t,
            t_skin: t,
            sim_time: 0.0,
        }
    }

    /// Steady state of the network with no drive current.
    pub fn open_circuit_equilibrium(net: &ThermalNetworkParams, ted: &TedParams) -> Self {
        let t_cold = net.cold_boundary();
        let q = (net.t_core - t_cold) / net.series_resistance(ted);
        let t_skin = net.t_core - q * net.r_body;
        let t_abs = t_skin - q * net.r_contact;
        let t_emit = net.fixed_emit.unwrap_or(t_abs - q * ted.theta_m);
        Self {
            t_abs,
            t_emit,
            t_skin,
            sim_time: 0.0,
        }
    }

    pub fn check_envelope(&self) -> Result<(), TedError> {
        for (node, value) in [
            ("t_abs", self.t_abs),
            ("t_emit", self.t_emit),
            ("t_skin", self.t_skin),
        ] {
            if !value.is_finite() || !(ENVELOPE_K.0..=ENVELOPE_K.1).contains(&value) {
                return Err(TedError::OutOfEnvelope { node, value });
            }
        }
        Ok(())
    }
}

/// Temperature derivatives `[dT_a, dT_e, dT_skin]` in K/s.
fn derivatives(t: [f64; 3], net: &ThermalNetworkParams, ted: &TedParams, current: f64) -> [f64; 3] {
    let [t_abs, t_emit, t_skin] = t;
    let q_abs = heat_flow_absorbed(ted, t_abs, t_emit, current);
    let q_emit = heat_flow_emitted(ted, t_abs, t_emit, current);
    let contact = (t_skin - t_abs) / net.r_contact;

    let d_abs = (-q_abs + contact) / net.c_abs;
    let d_skin = ((net.t_core - t_skin) / net.r_body - contact) / net.c_skin;
    let d_emit = match net.fixed_emit {
        Some(_) => 0.0,
        None => (q_emit + (net.t_ambient - t_emit) / net.r_sink) / net.c_emit,
    };
    [d_abs, d_emit, d_skin]
}

fn axpy(base: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [base[0] + h * k[0], base[1] + h * k[1], base[2] + h * k[2]]
}

/// Advances the network by one classical RK4 step with constant `current`.
pub fn plant_step(
    state: &PlantState,
    net: &ThermalNetworkParams,
    ted: &TedParams,
    current: f64,
    dt: f64,
) -> Result<PlantState, TedError> {
    if !(dt > 0.0 && dt <= MAX_STEP_S) {
        return Err(TedError::BadStep {
            dt,
            max: MAX_STEP_S,
        });
    }
    state.check_envelope()?;

    let y = [state.t_abs, state.t_emit, state.t_skin];
    let f = |t| derivatives(t, net, ted, current);
    let k1 = f(y);
    let k2 = f(axpy(y, k1, 0.5 * dt));
    let k3 = f(axpy(y, k2, 0.5 * dt));
    let k4 = f(axpy(y, k3, dt));
    let next: [f64; 3] =
        std::array::from_fn(|n| y[n] + dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]));

    Ok(PlantState {
        t_abs: next[0],
        t_emit: net.fixed_emit.unwrap_or(next[1]),
        t_skin: next[2],
        sim_time: state.sim_time + dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ted::k_to_c;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat_net(t: f64) -> ThermalNetworkParams {
        ThermalNetworkParams {
            t_core: t,
            t_ambient: t,
            ..ThermalNetworkParams::default()
        }
    }

    fn run(
        mut s: PlantState,
        net: &ThermalNetworkParams,
        current: f64,
        dt: f64,
        secs: f64,
    ) -> PlantState {
        let steps = (secs / dt).round() as usize;
        for _ in 0..steps {
            s = plant_step(&s, net, &TedParams::default(), current, dt).unwrap();
        }
        s
    }

    #[test]
    fn default_network_rests_at_skin_baseline() {
        let net = ThermalNetworkParams::default();
        net.validate().unwrap();
        let s = PlantState::open_circuit_equilibrium(&net, &TedParams::default());
        assert_relative_eq!(k_to_c(s.t_skin), 31.0, epsilon = 1e-9);
        let later = run(s, &net, 0.0, 0.001, 5.0);
        assert_relative_eq!(later.t_skin, s.t_skin, epsilon = 1e-9);
        assert_relative_eq!(later.t_abs, s.t_abs, epsilon = 1e-9);
        assert_relative_eq!(later.t_emit, s.t_emit, epsilon = 1e-9);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let t = 305.0;
        let net = flat_net(t);
        let s0 = PlantState::uniform(t);
        for dt in [0.001, 0.005, 0.01] {
            let s1 = plant_step(&s0, &net, &TedParams::default(), 0.0, dt).unwrap();
            assert!((s1.t_abs - t).abs() <= 1e-12);
            assert!((s1.t_emit - t).abs() <= 1e-12);
            assert!((s1.t_skin - t).abs() <= 1e-12);
            assert_eq!(s1.sim_time, dt);
        }
    }

    #[test]
    fn one_cooling_step_moves_faces_apart() {
        let net = flat_net(305.0);
        let s0 = PlantState::uniform(305.0);
        let s1 = plant_step(&s0, &net, &TedParams::default(), 0.6, 0.001).unwrap();
        assert!(s1.t_abs < s0.t_abs);
        assert!(s1.t_emit > s0.t_emit);
    }

    #[test]
    fn sustained_drive_heats_sink_and_erodes_cooling() {
        let net = ThermalNetworkParams::default();
        let ted = TedParams::default();
        let mut s = PlantState::open_circuit_equilibrium(&net, &ted);
        let mut prev_emit = s.t_emit;
        let mut prev_q = heat_flow_absorbed(&ted, s.t_abs, s.t_emit, 0.6);
        for step in 0..300_000 {
            s = plant_step(&s, &net, &ted, 0.6, 0.001).unwrap();
            // sample each 10 ms to keep the comparison above rounding noise
            if step % 10 == 9 {
                let q = heat_flow_absorbed(&ted, s.t_abs, s.t_emit, 0.6);
                assert!(s.t_emit > prev_emit, "t_emit stalled at step {step}");
                assert!(q < prev_q, "Q1 rose at step {step}");
                prev_emit = s.t_emit;
                prev_q = q;
            }
        }
    }

    #[test]
    fn fixed_emit_face_never_moves() {
        let ted = TedParams::default();
        let net = ThermalNetworkParams {
            fixed_emit: Some(c_to_k(30.0)),
            ..ThermalNetworkParams::default()
        };
        let net = ThermalNetworkParams::with_skin_baseline(net, &ted, c_to_k(31.0));
        let s = PlantState::open_circuit_equilibrium(&net, &ted);
        assert_relative_eq!(k_to_c(s.t_skin), 31.0, epsilon = 1e-9);
        let s = run(s, &net, 0.6, 0.001, 10.0);
        assert_eq!(s.t_emit, c_to_k(30.0));
    }

    #[test]
    fn rejects_bad_steps_and_states() {
        let net = flat_net(305.0);
        let ted = TedParams::default();
        let s = PlantState::uniform(305.0);
        for dt in [0.0, -0.001, 0.02, f64::NAN] {
            assert!(matches!(
                plant_step(&s, &net, &ted, 0.0, dt),
                Err(TedError::BadStep { .. })
            ));
        }
        let hot = PlantState { t_emit: 450.0, ..s };
        assert!(matches!(
            plant_step(&hot, &net, &ted, 0.0, 0.001),
            Err(TedError::OutOfEnvelope { node: "t_emit", .. })
        ));
    }

    #[test]
    fn halving_dt_converges() {
        let net = ThermalNetworkParams::default();
        let ted = TedParams::default();
        let s0 = PlantState::open_circuit_equilibrium(&net, &ted);
        for current in [0.6, -0.6, 0.25] {
            let coarse = run(s0, &net, current, 0.002, 10.0);
            let fine = run(s0, &net, current, 0.001, 10.0);
            assert!((coarse.t_abs - fine.t_abs).abs() <= 1e-6);
            assert!((coarse.t_emit - fine.t_emit).abs() <= 1e-6);
            assert!((coarse.t_skin - fine.t_skin).abs() <= 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn zero_current_obeys_maximum_principle(
            t_abs in 290.0f64..320.0,
            t_emit in 290.0f64..320.0,
            t_skin in 290.0f64..320.0,
            bound in 290.0f64..320.0,
        ) {
            let net = flat_net(bound.clamp(273.15, 323.15));
            let mut s = PlantState { t_abs, t_emit, t_skin, sim_time: 0.0 };
            let hi = t_abs.max(t_emit).max(t_skin).max(net.t_core);
            let lo = t_abs.min(t_emit).min(t_skin).min(net.t_core);
            for _ in 0..2000 {
                s = plant_step(&s, &net, &TedParams::default(), 0.0, 0.001).unwrap();
                for t in [s.t_abs, s.t_emit, s.t_skin] {
                    prop_assert!(t <= hi + 1e-9 && t >= lo - 1e-9);
                }
            }
        }
    }
}
