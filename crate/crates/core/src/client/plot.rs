//! Static SVG line charts, one file per trace channel.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use thiserror::Error;

use crate::trace::TraceRecord;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot: trace is empty")]
    Empty,
    #[error("{path}: {message}")]
    Draw { path: PathBuf, message: String },
}

pub struct Channel {
    pub name: &'static str,
    pub axis: &'static str,
    pub value: fn(&TraceRecord) -> f64,
}

pub const CHANNELS: [Channel; 6] = [
    Channel {
        name: "t_abs_c",
        axis: "absorbed face (°C)",
        value: |r| r.t_abs_c,
    },
    Channel {
        name: "t_emit_c",
        axis: "emitted face (°C)",
        value: |r| r.t_emit_c,
    },
    Channel {
        name: "t_skin_c",
        axis: "skin (°C)",
        value: |r| r.t_skin_c,
    },
    Channel {
        name: "current_a",
        axis: "current (A)",
        value: |r| r.current_a,
    },
    Channel {
        name: "heat_w",
        axis: "absorbed heat (W)",
        value: |r| r.heat_w,
    },
    Channel {
        name: "battery_pct",
        axis: "battery (%)",
        value: |r| r.battery_pct,
    },
];

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

fn draw(trace: &[TraceRecord], channel: &Channel, path: &Path) -> Result<(), String> {
    let root = SVGBackend::new(path, (900, 360)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| e.to_string())?;
    let t0 = trace[0].time_s;
    let t1 = trace[trace.len() - 1].time_s.max(t0 + 1e-3);
    let (lo, hi) = padded_range(trace.iter().map(channel.value));
    let mut chart = ChartBuilder::on(&root)
        .caption(channel.name, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(t0..t1, lo..hi)
        .map_err(|e| e.to_string())?;
    chart
        .configure_mesh()
        .x_desc("time (s)")
        .y_desc(channel.axis)
        .draw()
        .map_err(|e| e.to_string())?;
    chart
        .draw_series(LineSeries::new(
            trace.iter().map(|r| (r.time_s, (channel.value)(r))),
            &BLUE,
        ))
        .map_err(|e| e.to_string())?;
    root.present().map_err(|e| e.to_string())
}

/// Writes `<stem>_<channel>.svg` into `dir` for every channel.
pub fn plot_trace(
    trace: &[TraceRecord],
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>, PlotError> {
    if trace.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut written = Vec::new();
    for channel in &CHANNELS {
        let path = dir.join(format!("{stem}_{}.svg", channel.name));
        draw(trace, channel, &path).map_err(|message| PlotError::Draw {
            path: path.clone(),
            message,
        })?;
        written.push(path);
    }
    Ok(written)
}
