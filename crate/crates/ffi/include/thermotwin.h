#ifndef THERMOTWIN_H
#define THERMOTWIN_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  TT_STATUS_OK = 0,
  TT_STATUS_NULL_POINTER = 1,
  TT_STATUS_INVALID_ARGUMENT = 2,
  TT_STATUS_OUT_OF_RANGE = 3,
  /**
   * The command is not allowed now, e.g. enabling with an empty battery.
   */
  TT_STATUS_INVALID_STATE = 4,
  TT_STATUS_SIMULATION = 5,
  /**
   * Input was corrupt and has been discarded.
   */
  TT_STATUS_BAD_FRAME = 6,
  TT_STATUS_BUFFER_TOO_SMALL = 7,
  /**
   * Nothing to return yet.
   */
  TT_STATUS_EMPTY = 8,
  /**
   * A Rust panic was caught at the boundary; the handle should be freed.
   */
  TT_STATUS_INTERNAL = 9,
} TtStatus;

/**
 * Incremental frame splitter. Opaque to C.
 */
typedef struct TtDecoder TtDecoder;

/**
 * Emulated device. Opaque to C.
 */
typedef struct TtDevice TtDevice;

typedef struct {
  /**
   * V/K
   */
  double seebeck_alpha;
  double resistance_ohm;
  /**
   * K/W
   */
  double theta_m;
} TtTedParams;

typedef struct {
  double current_a;
  /**
   * The setpoint was not reachable within the current limit.
   */
  bool saturated;
} TtCurrent;

/**
 * One control tick as seen from outside.
 */
typedef struct {
  double time_s;
  double t_abs_c;
  double t_emit_c;
  double t_skin_c;
  double current_a;
  double heat_w;
  double power_w;
  double voltage;
  double setpoint;
  /**
   * 0 off, 1 heat flow, 2 temperature.
   */
  uint8_t mode;
  /**
   * Telemetry flag bits.
   */
  uint8_t flags;
  double battery_pct;
} TtTick;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code. Never NULL.
 */
const char *tt_status_str(TtStatus status);

TtTedParams tt_ted_params_default(void);

/**
 * Heat drawn from the skin side, W. NaN if `params` is NULL.
 *
 * # Safety
 * `params` must be NULL or point to a valid `TtTedParams`.
 */
double tt_heat_flow_absorbed(const TtTedParams *params,
                             double t_abs_k,
                             double t_emit_k,
                             double current_a);

/**
 * Electrical power into the module, W. NaN if `params` is NULL.
 *
 * # Safety
 * `params` must be NULL or point to a valid `TtTedParams`.
 */
double tt_electrical_power(const TtTedParams *params,
                           double t_abs_k,
                           double t_emit_k,
                           double current_a);

/**
 * Smallest-magnitude current delivering `q_set_w` within `[-i_max, i_max]`.
 *
 * # Safety
 * `params` and `out` must be NULL or valid.
 */
TtStatus tt_current_for_heat(const TtTedParams *params,
                             double t_abs_k,
                             double t_emit_k,
                             double q_set_w,
                             double i_max_a,
                             TtCurrent *out);

/**
 * CRC-16/CCITT-FALSE of `len` bytes. Zero-length or NULL input gives the
 * initial value 0xFFFF.
 *
 * # Safety
 * `data` must be valid for `len` bytes when non-null.
 */
uint16_t tt_crc16(const uint8_t *data, size_t len);

/**
 * Creates a device from a TOML config, or defaults when `config_toml` is
 * NULL. The device starts disabled.
 *
 * # Safety
 * `config_toml` must be NULL or a NUL-terminated string; `out` must be valid.
 */
TtStatus tt_device_new(const char *config_toml, TtDevice **out);

/**
 * # Safety
 * `device` must be NULL or come from `tt_device_new` and not be used again.
 */
void tt_device_free(TtDevice *device);

/**
 * # Safety
 * `device` must be NULL or a live handle.
 */
TtStatus tt_device_set_enabled(TtDevice *device, bool on);

/**
 * Switches to heat-flow control at `watts` (positive cools the skin).
 *
 * # Safety
 * `device` must be NULL or a live handle.
 */
TtStatus tt_device_set_heat(TtDevice *device, double watts);

/**
 * Switches to temperature control at `celsius`.
 *
 * # Safety
 * `device` must be NULL or a live handle.
 */
TtStatus tt_device_set_temp(TtDevice *device, double celsius);

/**
 * Advances one control period. `out` may be NULL.
 *
 * # Safety
 * `device` must be NULL or a live handle; `out` NULL or valid.
 */
TtStatus tt_device_tick(TtDevice *device, TtTick *out);

/**
 * Feeds one complete frame to the device and writes its reply frame.
 *
 * Returns `TT_STATUS_BAD_FRAME` with `*reply_len == 0` when the input is
 * discarded without a reply. If the reply does not fit, `*reply_len` holds
 * the size needed; the command has still been applied.
 *
 * # Safety
 * `frame` valid for `len` bytes, `reply` valid for `cap` bytes.
 */
TtStatus tt_device_handle_frame(TtDevice *device,
                                const uint8_t *frame,
                                size_t len,
                                uint8_t *reply,
                                size_t cap,
                                size_t *reply_len);

/**
 * Latest telemetry frame, as broadcast by the service.
 *
 * # Safety
 * `buf` valid for `cap` bytes; `out_len` valid.
 */
TtStatus tt_device_telemetry_frame(const TtDevice *device,
                                   uint8_t *buf,
                                   size_t cap,
                                   size_t *out_len);

TtDecoder *tt_decoder_new(void);

/**
 * # Safety
 * `decoder` must be NULL or come from `tt_decoder_new` and not be used again.
 */
void tt_decoder_free(TtDecoder *decoder);

/**
 * Appends received bytes.
 *
 * # Safety
 * `decoder` a live handle; `data` valid for `len` bytes.
 */
TtStatus tt_decoder_push(TtDecoder *decoder, const uint8_t *data, size_t len);

/**
 * Pops the next valid frame into `buf` and its type byte into `msg_type`.
 *
 * `TT_STATUS_EMPTY` means more bytes are needed. `TT_STATUS_BAD_FRAME`
 * means corrupt bytes were skipped; call again to continue.
 *
 * # Safety
 * `decoder` a live handle; `msg_type`, `out_len` valid; `buf` valid for
 * `cap` bytes.
 */
TtStatus tt_decoder_next(TtDecoder *decoder,
                         uint8_t *msg_type,
                         uint8_t *buf,
                         size_t cap,
                         size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THERMOTWIN_H */
