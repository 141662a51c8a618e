//! C ABI for the thermotwin device model, module physics and wire protocol.
//!
//! Handles are opaque. Each `*_new` pairs with a `*_free`, and freeing NULL
//! is a no-op. Fallible calls return a [`TtStatus`] and write their outputs
//! only on `TT_STATUS_OK`. Temperatures crossing the boundary are kelvin for
//! the physics calls and degrees C for device state, matching telemetry.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use thermotwin::control::{
    current_for_heat, ControlMode, ControlTarget, HeatSetpoint, TempSetpoint,
};
use thermotwin::device::{DeviceConfig, DeviceSim, TickRecord};
use thermotwin::protocol::{crc16, encode, FrameDecoder, Message};
use thermotwin::ted::{self, k_to_c, TedParams};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    /// The command is not allowed now, e.g. enabling with an empty battery.
    InvalidState = 4,
    Simulation = 5,
    /// Input was corrupt and has been discarded.
    BadFrame = 6,
    BufferTooSmall = 7,
    /// Nothing to return yet.
    Empty = 8,
    /// A Rust panic was caught at the boundary; the handle should be freed.
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtTedParams {
    /// V/K
    pub seebeck_alpha: f64,
    pub resistance_ohm: f64,
    /// K/W
    pub theta_m: f64,
}

impl From<TtTedParams> for TedParams {
    fn from(p: TtTedParams) -> Self {
        TedParams {
            seebeck_alpha: p.seebeck_alpha,
            resistance_ohm: p.resistance_ohm,
            theta_m: p.theta_m,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtCurrent {
    pub current_a: f64,
    /// The setpoint was not reachable within the current limit.
    pub saturated: bool,
}

/// One control tick as seen from outside.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtTick {
    pub time_s: f64,
    pub t_abs_c: f64,
    pub t_emit_c: f64,
    pub t_skin_c: f64,
    pub current_a: f64,
    pub heat_w: f64,
    pub power_w: f64,
    pub voltage: f64,
    pub setpoint: f64,
    /// 0 off, 1 heat flow, 2 temperature.
    pub mode: u8,
    /// Telemetry flag bits.
    pub flags: u8,
    pub battery_pct: f64,
}

impl From<&TickRecord> for TtTick {
    fn from(r: &TickRecord) -> Self {
        let trace = r.trace();
        TtTick {
            time_s: r.time_s,
            t_abs_c: k_to_c(r.t_abs),
            t_emit_c: k_to_c(r.t_emit),
            t_skin_c: k_to_c(r.t_skin),
            current_a: r.current,
            heat_w: r.heat_w,
            power_w: r.power_w,
            voltage: r.voltage,
            setpoint: trace.setpoint,
            mode: match trace.mode {
                ControlMode::Off => 0,
                ControlMode::HeatFlow => 1,
                ControlMode::Temperature => 2,
            },
            flags: r.flags,
            battery_pct: r.battery_pct,
        }
    }
}

/// Emulated device. Opaque to C.
pub struct TtDevice(DeviceSim);

/// Incremental frame splitter. Opaque to C.
pub struct TtDecoder(FrameDecoder);

fn guard(f: impl FnOnce() -> TtStatus) -> TtStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(TtStatus::Internal)
}

/// Copies `bytes` out, reporting the needed size even when it does not fit.
///
/// # Safety
/// `buf` must be valid for `cap` bytes when non-null.
unsafe fn write_out(bytes: &[u8], buf: *mut u8, cap: usize, out_len: *mut usize) -> TtStatus {
    if out_len.is_null() {
        return TtStatus::NullPointer;
    }
    *out_len = bytes.len();
    if bytes.len() > cap {
        return TtStatus::BufferTooSmall;
    }
    if buf.is_null() {
        return TtStatus::NullPointer;
    }
    std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
    TtStatus::Ok
}

/// Static description of a status code. Never NULL.
#[no_mangle]
pub extern "C" fn tt_status_str(status: TtStatus) -> *const c_char {
    let s: &'static CStr = match status {
        TtStatus::Ok => c"ok",
        TtStatus::NullPointer => c"null pointer",
        TtStatus::InvalidArgument => c"invalid argument",
        TtStatus::OutOfRange => c"value out of range",
        TtStatus::InvalidState => c"not allowed in the current state",
        TtStatus::Simulation => c"simulation error",
        TtStatus::BadFrame => c"corrupt frame discarded",
        TtStatus::BufferTooSmall => c"buffer too small",
        TtStatus::Empty => c"nothing available",
        TtStatus::Internal => c"internal error",
    };
    s.as_ptr()
}

#[no_mangle]
pub extern "C" fn tt_ted_params_default() -> TtTedParams {
    let p = TedParams::default();
    TtTedParams {
        seebeck_alpha: p.seebeck_alpha,
        resistance_ohm: p.resistance_ohm,
        theta_m: p.theta_m,
    }
}

/// Heat drawn from the skin side, W. NaN if `params` is NULL.
///
/// # Safety
/// `params` must be NULL or point to a valid `TtTedParams`.
#[no_mangle]
pub unsafe extern "C" fn tt_heat_flow_absorbed(
    params: *const TtTedParams,
    t_abs_k: f64,
    t_emit_k: f64,
    current_a: f64,
) -> f64 {
    match params.as_ref() {
        Some(p) => ted::heat_flow_absorbed(&(*p).into(), t_abs_k, t_emit_k, current_a),
        None => f64::NAN,
    }
}

/// Electrical power into the module, W. NaN if `params` is NULL.
///
/// # Safety
/// `params` must be NULL or point to a valid `TtTedParams`.
#[no_mangle]
pub unsafe extern "C" fn tt_electrical_power(
    params: *const TtTedParams,
    t_abs_k: f64,
    t_emit_k: f64,
    current_a: f64,
) -> f64 {
    match params.as_ref() {
        Some(p) => ted::electrical_power(&(*p).into(), t_abs_k, t_emit_k, current_a),
        None => f64::NAN,
    }
}

/// Smallest-magnitude current delivering `q_set_w` within `[-i_max, i_max]`.
///
/// # Safety
/// `params` and `out` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn tt_current_for_heat(
    params: *const TtTedParams,
    t_abs_k: f64,
    t_emit_k: f64,
    q_set_w: f64,
    i_max_a: f64,
    out: *mut TtCurrent,
) -> TtStatus {
    let (Some(p), false) = (params.as_ref(), out.is_null()) else {
        return TtStatus::NullPointer;
    };
    let ted: TedParams = (*p).into();
    if ted.validate().is_err() || !(i_max_a.is_finite() && i_max_a > 0.0) {
        return TtStatus::InvalidArgument;
    }
    if ![t_abs_k, t_emit_k, q_set_w].iter().all(|v| v.is_finite()) {
        return TtStatus::InvalidArgument;
    }
    let r = current_for_heat(&ted, t_abs_k, t_emit_k, q_set_w, i_max_a);
    *out = TtCurrent {
        current_a: r.current,
        saturated: r.saturated,
    };
    TtStatus::Ok
}

/// CRC-16/CCITT-FALSE of `len` bytes. Zero-length or NULL input gives the
/// initial value 0xFFFF.
///
/// # Safety
/// `data` must be valid for `len` bytes when non-null.
#[no_mangle]
pub unsafe extern "C" fn tt_crc16(data: *const u8, len: usize) -> u16 {
    if data.is_null() {
        return crc16(&[]);
    }
    crc16(std::slice::from_raw_parts(data, len))
}

/// Creates a device from a TOML config, or defaults when `config_toml` is
/// NULL. The device starts disabled.
///
/// # Safety
/// `config_toml` must be NULL or a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tt_device_new(
    config_toml: *const c_char,
    out: *mut *mut TtDevice,
) -> TtStatus {
    if out.is_null() {
        return TtStatus::NullPointer;
    }
    guard(|| {
        let config = if config_toml.is_null() {
            DeviceConfig::default()
        } else {
            let Ok(text) = CStr::from_ptr(config_toml).to_str() else {
                return TtStatus::InvalidArgument;
            };
            match DeviceConfig::from_toml(text) {
                Ok(c) => c,
                Err(_) => return TtStatus::InvalidArgument,
            }
        };
        *out = Box::into_raw(Box::new(TtDevice(DeviceSim::new(config))));
        TtStatus::Ok
    })
}

/// # Safety
/// `device` must be NULL or come from `tt_device_new` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn tt_device_free(device: *mut TtDevice) {
    if !device.is_null() {
        drop(Box::from_raw(device));
    }
}

/// # Safety
/// `device` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tt_device_set_enabled(device: *mut TtDevice, on: bool) -> TtStatus {
    let Some(d) = device.as_mut() else {
        return TtStatus::NullPointer;
    };
    if d.0.set_enabled(on) == on {
        TtStatus::Ok
    } else {
        TtStatus::InvalidState
    }
}

/// Switches to heat-flow control at `watts` (positive cools the skin).
///
/// # Safety
/// `device` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tt_device_set_heat(device: *mut TtDevice, watts: f64) -> TtStatus {
    let Some(d) = device.as_mut() else {
        return TtStatus::NullPointer;
    };
    match HeatSetpoint::new(watts) {
        Ok(h) => {
            d.0.command_target(ControlTarget::HeatFlow(h));
            TtStatus::Ok
        }
        Err(_) => TtStatus::OutOfRange,
    }
}

/// Switches to temperature control at `celsius`.
///
/// # Safety
/// `device` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tt_device_set_temp(device: *mut TtDevice, celsius: f64) -> TtStatus {
    let Some(d) = device.as_mut() else {
        return TtStatus::NullPointer;
    };
    match TempSetpoint::new(celsius) {
        Ok(t) => {
            d.0.command_target(ControlTarget::Temperature(t));
            TtStatus::Ok
        }
        Err(_) => TtStatus::OutOfRange,
    }
}

/// Advances one control period. `out` may be NULL.
///
/// # Safety
/// `device` must be NULL or a live handle; `out` NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn tt_device_tick(device: *mut TtDevice, out: *mut TtTick) -> TtStatus {
    let Some(d) = device.as_mut() else {
        return TtStatus::NullPointer;
    };
    guard(|| match d.0.tick() {
        Ok(r) => {
            if let Some(o) = out.as_mut() {
                *o = TtTick::from(r);
            }
            TtStatus::Ok
        }
        Err(_) => TtStatus::Simulation,
    })
}

/// Feeds one complete frame to the device and writes its reply frame.
///
/// Returns `TT_STATUS_BAD_FRAME` with `*reply_len == 0` when the input is
/// discarded without a reply. If the reply does not fit, `*reply_len` holds
/// the size needed; the command has still been applied.
///
/// # Safety
/// `frame` valid for `len` bytes, `reply` valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn tt_device_handle_frame(
    device: *mut TtDevice,
    frame: *const u8,
    len: usize,
    reply: *mut u8,
    cap: usize,
    reply_len: *mut usize,
) -> TtStatus {
    let Some(d) = device.as_mut() else {
        return TtStatus::NullPointer;
    };
    if frame.is_null() || reply_len.is_null() {
        return TtStatus::NullPointer;
    }
    let input = std::slice::from_raw_parts(frame, len);
    guard(|| match d.0.handle(thermotwin::protocol::decode(input)) {
        Some(answer) => match encode(&answer) {
            Ok(bytes) => write_out(&bytes, reply, cap, reply_len),
            Err(_) => TtStatus::Internal,
        },
        None => {
            *reply_len = 0;
            TtStatus::BadFrame
        }
    })
}

/// Latest telemetry frame, as broadcast by the service.
///
/// # Safety
/// `buf` valid for `cap` bytes; `out_len` valid.
#[no_mangle]
pub unsafe extern "C" fn tt_device_telemetry_frame(
    device: *const TtDevice,
    buf: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> TtStatus {
    let Some(d) = device.as_ref() else {
        return TtStatus::NullPointer;
    };
    match encode(&Message::Telemetry(d.0.telemetry())) {
        Ok(bytes) => write_out(&bytes, buf, cap, out_len),
        Err(_) => TtStatus::Internal,
    }
}

#[no_mangle]
pub extern "C" fn tt_decoder_new() -> *mut TtDecoder {
    Box::into_raw(Box::new(TtDecoder(FrameDecoder::new())))
}

/// # Safety
/// `decoder` must be NULL or come from `tt_decoder_new` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn tt_decoder_free(decoder: *mut TtDecoder) {
    if !decoder.is_null() {
        drop(Box::from_raw(decoder));
    }
}

/// Appends received bytes.
///
/// # Safety
/// `decoder` a live handle; `data` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tt_decoder_push(
    decoder: *mut TtDecoder,
    data: *const u8,
    len: usize,
) -> TtStatus {
    let Some(d) = decoder.as_mut() else {
        return TtStatus::NullPointer;
    };
    if len == 0 {
        return TtStatus::Ok;
    }
    if data.is_null() {
        return TtStatus::NullPointer;
    }
    d.0.push(std::slice::from_raw_parts(data, len));
    TtStatus::Ok
}

/// Pops the next valid frame into `buf` and its type byte into `msg_type`.
///
/// `TT_STATUS_EMPTY` means more bytes are needed. `TT_STATUS_BAD_FRAME`
/// means corrupt bytes were skipped; call again to continue.
///
/// # Safety
/// `decoder` a live handle; `msg_type`, `out_len` valid; `buf` valid for
/// `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn tt_decoder_next(
    decoder: *mut TtDecoder,
    msg_type: *mut u8,
    buf: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> TtStatus {
    let Some(d) = decoder.as_mut() else {
        return TtStatus::NullPointer;
    };
    if msg_type.is_null() || out_len.is_null() {
        return TtStatus::NullPointer;
    }
    match d.0.next_message() {
        None => TtStatus::Empty,
        Some(Err(_)) => TtStatus::BadFrame,
        Some(Ok(msg)) => match encode(&msg) {
            Ok(bytes) => {
                *msg_type = bytes[3];
                write_out(&bytes, buf, cap, out_len)
            }
            Err(_) => TtStatus::Internal,
        },
    }
}
