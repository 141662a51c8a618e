//! Open-loop heat-flow control: invert the absorbed-heat quadratic for current.

use super::CurrentRequest;
use crate::ted::{heat_flow_absorbed, TedParams};

/// Both real roots of `Q1(I) = q_set`, smaller magnitude first.
///
/// `None` when `q_set` lies above the vertex of the parabola.
pub fn heat_roots(ted: &TedParams, t_abs: f64, t_emit: f64, q_set: f64) -> Option<(f64, f64)> {
    let b = ted.seebeck_alpha * t_abs;
    let conduction = (t_abs - t_emit) / ted.theta_m;
    let disc = b * b + 2.0 * ted.resistance_ohm * (conduction - q_set);
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // cancellation-free form of (b - sqrt(disc)) / R
    let small = 2.0 * (q_set - conduction) / (b + sq);
    let large = (b + sq) / ted.resistance_ohm;
    if small.abs() <= large.abs() {
        Some((small, large))
    } else {
        Some((large, small))
    }
}

/// Current that delivers `q_set` at the absorbed face.
///
/// Picks the smallest-magnitude exact solution inside `[-i_max, i_max]`. If
/// none exists the in-range current closest in heat is returned and flagged
/// as saturated.
pub fn current_for_heat(
    ted: &TedParams,
    t_abs: f64,
    t_emit: f64,
    q_set: f64,
    i_max: f64,
) -> CurrentRequest {
    if let Some((first, second)) = heat_roots(ted, t_abs, t_emit, q_set) {
        for root in [first, second] {
            if root.abs() <= i_max {
                return CurrentRequest {
                    current: root,
                    saturated: false,
                };
            }
        }
    }

    let vertex = ted.optimal_current(t_abs).clamp(-i_max, i_max);
    let miss = |i: f64| (heat_flow_absorbed(ted, t_abs, t_emit, i) - q_set).abs();
    let best = [vertex, -i_max, i_max]
        .into_iter()
        .min_by(|a, b| {
            miss(*a)
                .total_cmp(&miss(*b))
                .then(a.abs().total_cmp(&b.abs()))
        })
        .unwrap_or(0.0);
    CurrentRequest {
        current: best,
        saturated: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p() -> TedParams {
        TedParams::default()
    }

    #[test]
    fn zero_heat_needs_zero_current() {
        let r = current_for_heat(&p(), 305.0, 305.0, 0.0, 0.6);
        assert_eq!(r.current, 0.0);
        assert!(!r.saturated);
    }

    #[test]
    fn inverts_forward_example() {
        let r = current_for_heat(&p(), 305.0, 305.0, 4.08, 0.6);
        assert_relative_eq!(r.current, 0.6, epsilon = 1e-9);
        assert!(!r.saturated);
    }

    #[test]
    fn unreachable_heat_saturates_at_bound() {
        let r = current_for_heat(&p(), 305.0, 305.0, 9.0, 0.6);
        assert_eq!(r.current, 0.6);
        assert!(r.saturated);
        // above the vertex entirely
        let r = current_for_heat(&p(), 305.0, 305.0, 9.0, 10.0);
        assert_relative_eq!(r.current, p().optimal_current(305.0), epsilon = 1e-12);
        assert!(r.saturated);
        let r = current_for_heat(&p(), 305.0, 305.0, -9.0, 0.6);
        assert_eq!(r.current, -0.6);
        assert!(r.saturated);
    }

    #[test]
    fn heating_levels_reachable_at_skin_temperature() {
        for q in [-4.0, -2.0, 2.0, 4.0] {
            let r = current_for_heat(&p(), 304.15, 304.15, q, 0.6);
            assert!(!r.saturated, "{q} W");
            assert_relative_eq!(
                heat_flow_absorbed(&p(), 304.15, 304.15, r.current),
                q,
                epsilon = 1e-9
            );
        }
    }

    proptest! {
        #[test]
        fn returns_smaller_root_when_both_in_range(
            alpha in 0.005f64..0.02,
            r in 8.0f64..20.0,
            theta in 2.0f64..30.0,
            t_abs in 285.0f64..315.0,
            t_emit in 285.0f64..330.0,
            frac in 0.0f64..0.999,
        ) {
            let ted = TedParams { seebeck_alpha: alpha, resistance_ohm: r, theta_m: theta };
            let i_max = 2.0;
            let (q_lo, q_hi) = (
                heat_flow_absorbed(&ted, t_abs, t_emit, -i_max).max(heat_flow_absorbed(&ted, t_abs, t_emit, i_max)),
                heat_flow_absorbed(&ted, t_abs, t_emit, ted.optimal_current(t_abs)),
            );
            let q_set = q_lo + frac * (q_hi - q_lo);
            let got = current_for_heat(&ted, t_abs, t_emit, q_set, i_max);
            prop_assert!(!got.saturated);
            // independent recomputation of both roots with the textbook formula
            let (a, b, c) = (-r / 2.0, alpha * t_abs, (t_abs - t_emit) / theta - q_set);
            let d = (b * b - 4.0 * a * c).max(0.0).sqrt();
            let roots = [(-b + d) / (2.0 * a), (-b - d) / (2.0 * a)];
            for root in roots.iter().filter(|x| x.abs() <= i_max) {
                prop_assert!(got.current.abs() <= root.abs() + 1e-9);
            }
            prop_assert!((heat_flow_absorbed(&ted, t_abs, t_emit, got.current) - q_set).abs() <= 1e-9);
        }
    }
}
