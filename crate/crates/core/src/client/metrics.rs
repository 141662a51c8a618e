//! Step-response metrics over a recorded trace.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControlMode;
use crate::trace::TraceRecord;

/// Fraction of the step that counts as "reached".
pub const RESPONSE_FRACTION: f64 = 0.9;
/// Width of the sliding line fit used for slew.
pub const SLEW_WINDOW_S: f64 = 0.5;
/// Tail of each hold averaged for steady-state error.
pub const STEADY_WINDOW_S: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trace is empty")]
    Empty,
    #[error("time goes backwards at row {0}")]
    NonMonotoneTime(usize),
    #[error("event at row {index} lies outside the {len}-row trace")]
    EventOutOfRange { index: usize, len: usize },
}

/// A setpoint change. `index` is the first record computed under the new
/// target; `end` is one past its last record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub index: usize,
    pub end: usize,
    pub time_s: f64,
    pub mode: ControlMode,
    pub setpoint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub time_s: f64,
    pub mode: ControlMode,
    pub setpoint: f64,
    /// Channel value when the step was commanded.
    pub initial: f64,
    /// `None` when the hold ended before 90 % of the step.
    pub response_time_s: Option<f64>,
    /// Steepest 0.5 s line-fit slope in the step direction, per second.
    /// Only reported for temperature steps.
    pub slew_per_s: Option<f64>,
    pub steady_state_error: f64,
    pub overshoot_pct: f64,
}

impl StepMetrics {
    pub fn magnitude(&self) -> f64 {
        (self.setpoint - self.initial).abs()
    }
}

/// Channel a mode is judged on: absorbed heat for heat-flow steps, contact
/// temperature for temperature steps.
pub fn channel(record: &TraceRecord, mode: ControlMode) -> f64 {
    match mode {
        ControlMode::HeatFlow => record.heat_w,
        ControlMode::Temperature | ControlMode::Off => record.t_abs_c,
    }
}

/// Splits a trace at every change of mode or setpoint. The opening hold has
/// no "before" and is not an event; holds in off mode are skipped.
pub fn events_from_trace(trace: &[TraceRecord]) -> Vec<StepEvent> {
    let mut starts = Vec::new();
    for i in 1..trace.len() {
        let (a, b) = (&trace[i - 1], &trace[i]);
        if a.mode != b.mode || a.setpoint != b.setpoint {
            starts.push(i);
        }
    }
    let mut out = Vec::with_capacity(starts.len());
    for (k, &index) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(trace.len());
        let r = &trace[index];
        if r.mode == ControlMode::Off {
            continue;
        }
        out.push(StepEvent {
            index,
            end,
            time_s: trace[index - 1].time_s,
            mode: r.mode,
            setpoint: r.setpoint,
        });
    }
    out
}

fn check(trace: &[TraceRecord]) -> Result<(), MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::Empty);
    }
    for i in 1..trace.len() {
        if trace[i].time_s.partial_cmp(&trace[i - 1].time_s) != Some(Ordering::Greater) {
            return Err(MetricsError::NonMonotoneTime(i + 1));
        }
    }
    Ok(())
}

/// Least-squares slope of `ys` against `ts`.
fn fit_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(ys) {
        sxy += (t - mt) * (y - my);
        sxx += (t - mt) * (t - mt);
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

fn step_metrics(trace: &[TraceRecord], ev: &StepEvent) -> StepMetrics {
    let mode = ev.mode;
    let initial = channel(&trace[ev.index - 1], mode);
    let delta = ev.setpoint - initial;
    let seg = &trace[ev.index..ev.end];

    let response_time_s = if delta == 0.0 {
        Some(0.0)
    } else {
        seg.iter()
            .find(|r| (channel(r, mode) - initial) / delta >= RESPONSE_FRACTION)
            .map(|r| r.time_s - ev.time_s)
    };

    let slew_per_s = (mode == ControlMode::Temperature).then(|| {
        // include the sample at the step so the first window sees the start
        let with_start = &trace[ev.index - 1..ev.end];
        let ts: Vec<f64> = with_start.iter().map(|r| r.time_s).collect();
        let ys: Vec<f64> = with_start.iter().map(|r| channel(r, mode)).collect();
        let direction = if delta < 0.0 { -1.0 } else { 1.0 };
        let mut best: f64 = 0.0;
        let mut lo = 0;
        for hi in 0..ts.len() {
            while ts[hi] - ts[lo] > SLEW_WINDOW_S + 1e-9 {
                lo += 1;
            }
            if hi > lo && ts[hi] - ts[lo] >= SLEW_WINDOW_S - 1e-9 {
                best = best.max(direction * fit_slope(&ts[lo..=hi], &ys[lo..=hi]));
            }
        }
        if best == 0.0 && ts.len() >= 2 {
            // hold shorter than one window: fit what there is
            best = (direction * fit_slope(&ts, &ys)).max(0.0);
        }
        best
    });

    let end_time = seg.last().map(|r| r.time_s).unwrap_or(ev.time_s);
    let tail: Vec<f64> = seg
        .iter()
        .filter(|r| r.time_s > end_time - STEADY_WINDOW_S + 1e-9)
        .map(|r| (channel(r, mode) - ev.setpoint).abs())
        .collect();
    let steady_state_error = if tail.is_empty() {
        0.0
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };

    let overshoot_pct = if delta == 0.0 {
        0.0
    } else {
        seg.iter()
            .map(|r| (channel(r, mode) - ev.setpoint) / delta * 100.0)
            .fold(0.0, f64::max)
    };

    StepMetrics {
        time_s: ev.time_s,
        mode,
        setpoint: ev.setpoint,
        initial,
        response_time_s,
        slew_per_s,
        steady_state_error,
        overshoot_pct,
    }
}

pub fn compute_metrics(
    trace: &[TraceRecord],
    events: &[StepEvent],
) -> Result<Vec<StepMetrics>, MetricsError> {
    check(trace)?;
    for ev in events {
        if ev.index == 0 || ev.index >= trace.len() || ev.end > trace.len() || ev.end <= ev.index {
            return Err(MetricsError::EventOutOfRange {
                index: ev.index,
                len: trace.len(),
            });
        }
    }
    Ok(events.iter().map(|ev| step_metrics(trace, ev)).collect())
}

/// Metrics for every setpoint change found in the trace.
pub fn trace_metrics(trace: &[TraceRecord]) -> Result<Vec<StepMetrics>, MetricsError> {
    compute_metrics(trace, &events_from_trace(trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const DT: f64 = 0.01;

    fn rec(time_s: f64, mode: ControlMode, setpoint: f64, value: f64) -> TraceRecord {
        TraceRecord {
            time_s,
            t_abs_c: value,
            t_emit_c: 25.0,
            t_skin_c: 31.0,
            current_a: 0.0,
            heat_w: value,
            setpoint,
            mode,
            saturated: false,
            battery_pct: 100.0,
        }
    }

    /// One second at `y0`, then `hold` seconds driven by `response(t)`.
    fn build(
        mode: ControlMode,
        sp0: f64,
        y0: f64,
        sp: f64,
        hold: f64,
        response: impl Fn(f64) -> f64,
    ) -> Vec<TraceRecord> {
        let mut out = Vec::new();
        let pre = (1.0 / DT).round() as usize;
        for k in 1..=pre {
            out.push(rec(k as f64 * DT, mode, sp0, y0));
        }
        let n = (hold / DT).round() as usize;
        for k in 1..=n {
            let t = k as f64 * DT;
            out.push(rec(1.0 + t, mode, sp, response(t)));
        }
        out
    }

    #[test]
    fn one_tick_jump() {
        let trace = build(ControlMode::HeatFlow, 0.0, 0.0, -2.0, 5.0, |_| -2.0);
        let m = trace_metrics(&trace).unwrap();
        assert_eq!(m.len(), 1);
        assert_relative_eq!(m[0].response_time_s.unwrap(), DT, epsilon = 1e-12);
        assert_eq!(m[0].steady_state_error, 0.0);
        assert_eq!(m[0].overshoot_pct, 0.0);
        assert_eq!(m[0].slew_per_s, None);
    }

    #[test]
    fn first_order_rise_time() {
        let tau = 0.4;
        let trace = build(ControlMode::Temperature, 31.0, 31.0, 35.0, 5.0, |t| {
            31.0 + 4.0 * (1.0 - (-t / tau).exp())
        });
        let m = trace_metrics(&trace).unwrap();
        let expected = tau * 10f64.ln();
        assert!((m[0].response_time_s.unwrap() - expected).abs() <= DT);
    }

    #[test]
    fn ramp_slew() {
        let rate = 2.25;
        let trace = build(ControlMode::Temperature, 31.0, 31.0, 40.0, 5.0, |t| {
            (31.0 + rate * t).min(40.0)
        });
        let m = trace_metrics(&trace).unwrap();
        assert!((m[0].slew_per_s.unwrap() - rate).abs() <= rate * DT);
        assert_eq!(m[0].steady_state_error, 0.0);
    }

    #[test]
    fn downward_ramp_slew_is_positive() {
        let trace = build(ControlMode::Temperature, 31.0, 31.0, 25.0, 5.0, |t| {
            (31.0 - 1.5 * t).max(25.0)
        });
        let m = trace_metrics(&trace).unwrap();
        assert!((m[0].slew_per_s.unwrap() - 1.5).abs() <= 1.5 * DT);
    }

    #[test]
    fn overshoot_and_unreached() {
        let trace = build(ControlMode::Temperature, 31.0, 31.0, 35.0, 2.0, |t| {
            if t <= 1.0 + 1e-9 {
                31.0 + 5.0 * t
            } else {
                35.0
            }
        });
        let m = trace_metrics(&trace).unwrap();
        assert_relative_eq!(m[0].overshoot_pct, 25.0, epsilon = 1e-9);
        let slow = build(ControlMode::Temperature, 31.0, 31.0, 35.0, 2.0, |t| {
            31.0 + 0.1 * t
        });
        assert_eq!(trace_metrics(&slow).unwrap()[0].response_time_s, None);
    }

    #[test]
    fn steady_state_uses_last_second() {
        let trace = build(ControlMode::HeatFlow, 0.0, 0.0, 2.0, 5.0, |t| {
            if t > 4.0 {
                2.5
            } else {
                2.0
            }
        });
        let m = trace_metrics(&trace).unwrap();
        assert_relative_eq!(m[0].steady_state_error, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_traces_and_events() {
        assert_eq!(trace_metrics(&[]), Err(MetricsError::Empty));
        let mut trace = build(ControlMode::HeatFlow, 0.0, 0.0, 2.0, 1.0, |_| 2.0);
        let ev = events_from_trace(&trace);
        let mut far = ev[0];
        far.end = trace.len() + 5;
        assert!(matches!(
            compute_metrics(&trace, &[far]),
            Err(MetricsError::EventOutOfRange { .. })
        ));
        trace[10].time_s = 0.0;
        assert!(matches!(
            trace_metrics(&trace),
            Err(MetricsError::NonMonotoneTime(_))
        ));
    }

    #[test]
    fn metrics_are_pure() {
        let trace = build(ControlMode::Temperature, 31.0, 31.0, 29.0, 5.0, |t| {
            31.0 - 2.0 * (1.0 - (-t).exp())
        });
        assert_eq!(
            trace_metrics(&trace).unwrap(),
            trace_metrics(&trace).unwrap()
        );
    }
}
