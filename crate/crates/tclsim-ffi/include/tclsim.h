/* tclsim C API. Generated by cbindgen; do not edit. */

#ifndef TCLSIM_H
#define TCLSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which datapath `tcl_simulate_layer` prices.
 */
typedef enum TclArchMode {
  TCL_ARCH_MODE_DCNN = 0,
  TCL_ARCH_MODE_TCL_WS = 1,
  TCL_ARCH_MODE_TCL_P = 2,
  TCL_ARCH_MODE_TCL_E = 3,
} TclArchMode;

/**
 * Status codes returned by every fallible call.
 */
typedef enum TclStatus {
  TCL_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  TCL_STATUS_NULL_ARGUMENT = 1,
  TCL_STATUS_SHAPE = 2,
  TCL_STATUS_FORMAT = 3,
  TCL_STATUS_PRECISION = 4,
  TCL_STATUS_CORRUPT_SCHEDULE = 5,
  TCL_STATUS_CONFIG = 6,
  TCL_STATUS_MANIFEST = 7,
  TCL_STATUS_IO = 8,
  TCL_STATUS_JSON = 9,
  /**
   * The operation panicked (e.g. accumulator overflow in `tcl_dense_conv`).
   */
  TCL_STATUS_PANIC = 10,
} TclStatus;

/**
 * Opaque promotion pattern.
 */
typedef struct TclPattern TclPattern;

/**
 * Opaque rank-N tensor of 16-bit values.
 */
typedef struct TclTensor TclTensor;

/**
 * Machine geometry. `max_shift_delta < 0` means unrestricted.
 */
typedef struct TclArch {
  uint32_t lanes;
  uint32_t filters_per_tile;
  uint32_t tiles;
  uint32_t windows_parallel;
  enum TclArchMode mode;
  int32_t max_shift_delta;
} TclArch;

/**
 * Layer geometry. `relu` is 0 or 1; `precision_bits` is 1..=16.
 */
typedef struct TclLayer {
  uint32_t ax;
  uint32_t ay;
  uint32_t c;
  uint32_t fx;
  uint32_t fy;
  uint32_t kk;
  uint32_t stride;
  uint8_t relu;
  uint8_t precision_bits;
} TclLayer;

/**
 * Cycle counts and activity counters for one layer on one machine.
 */
typedef struct TclReport {
  uint64_t cycles;
  uint64_t dcnn_cycles;
  double speedup_vs_dcnn;
  uint64_t macs_executed;
  uint64_t columns_fetched;
  uint64_t bubbles;
  uint64_t activation_bits_broadcast;
} TclReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tcl_last_error_message(void);

/**
 * The default machine: 16 lanes, 16 filters/tile, 4 tiles, 16
 * parallel windows, dense mode, unrestricted shifts.
 */
struct TclArch tcl_arch_default(void);

/**
 * Load a TCLT file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 * On success `*out` owns a tensor that must be released with
 * [`tcl_tensor_free`].
 */
enum TclStatus tcl_tensor_load(const char *path, struct TclTensor **out);

/**
 * Write a tensor as a TCLT file.
 *
 * # Safety
 * `tensor` must come from this library and be live; `path` must be a
 * NUL-terminated string.
 */
enum TclStatus tcl_tensor_save(const struct TclTensor *tensor, const char *path);

/**
 * Build a tensor from a dims/data copy. `len` must equal the product of the
 * `rank` extents.
 *
 * # Safety
 * `dims` must point to `rank` readable u32 values, `data` to `len` readable
 * i16 values, and `out` must be valid. The data is copied.
 */
enum TclStatus tcl_tensor_from_data(const uint32_t *dims,
                                    size_t rank,
                                    const int16_t *data,
                                    size_t len,
                                    struct TclTensor **out);

/**
 * Number of dimensions, or 0 for null.
 *
 * # Safety
 * `tensor` must be null or a live handle from this library.
 */
size_t tcl_tensor_rank(const struct TclTensor *tensor);

/**
 * Copy the extents into `out` (`cap` must be >= rank).
 *
 * # Safety
 * `tensor` must be a live handle; `out` must hold `cap` writable u32 slots.
 */
enum TclStatus tcl_tensor_dims(const struct TclTensor *tensor, uint32_t *out, size_t cap);

/**
 * Total element count, or 0 for null.
 *
 * # Safety
 * `tensor` must be null or a live handle.
 */
size_t tcl_tensor_len(const struct TclTensor *tensor);

/**
 * Borrow the elements (row-major). Valid while the tensor is live.
 *
 * # Safety
 * `tensor` must be null or a live handle.
 */
const int16_t *tcl_tensor_data(const struct TclTensor *tensor);

/**
 * Release a tensor. Null is a no-op.
 *
 * # Safety
 * `tensor` must be null or an unfreed handle from this library.
 */
void tcl_tensor_free(struct TclTensor *tensor);

/**
 * Build the contiguous pattern with `h` lookahead steps and `d` lookaside
 * lanes for an `lanes`-lane machine.
 *
 * # Safety
 * `out` must be valid; the result must be released with
 * [`tcl_pattern_free`].
 */
enum TclStatus tcl_pattern_contiguous(size_t h, size_t d, size_t lanes, struct TclPattern **out);

/**
 * Parse the pattern-file format (`h=N` header, `dl,ds` lines).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid.
 */
enum TclStatus tcl_pattern_parse(const char *text, size_t lanes, struct TclPattern **out);

/**
 * Render to the pattern-file format. Free the string with
 * [`tcl_string_free`]. Returns null for a null pattern.
 *
 * # Safety
 * `pattern` must be null or a live handle.
 */
char *tcl_pattern_render(const struct TclPattern *pattern);

/**
 * Number of promotion sites, or 0 for null.
 *
 * # Safety
 * `pattern` must be null or a live handle.
 */
size_t tcl_pattern_site_count(const struct TclPattern *pattern);

/**
 * Release a pattern. Null is a no-op.
 *
 * # Safety
 * `pattern` must be null or an unfreed handle from this library.
 */
void tcl_pattern_free(struct TclPattern *pattern);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or an unfreed string allocated by this library.
 */
void tcl_string_free(char *s);

/**
 * Price one layer. `pattern` may be null (no promotion); `activations` may
 * be null except for the serial modes.
 *
 * # Safety
 * All non-null handles must be live; `layer`, `arch`, and `out` must point
 * to valid structs.
 */
enum TclStatus tcl_simulate_layer(const struct TclLayer *layer,
                                  const struct TclArch *arch,
                                  const struct TclPattern *pattern,
                                  const struct TclTensor *weights,
                                  const struct TclTensor *activations,
                                  struct TclReport *out);

/**
 * Price one layer on the default SCNN-style machine.
 *
 * # Safety
 * `layer` and `out` must be valid; `weights` and `activations` must be live
 * handles.
 */
enum TclStatus tcl_simulate_scnn(const struct TclLayer *layer,
                                 const struct TclTensor *weights,
                                 const struct TclTensor *activations,
                                 struct TclReport *out);

/**
 * Ideal speedups from skipping ineffectual work, written to `out[0..5]` in
 * the order A, W, WA, WAp, WAe. Unbounded ratios come out as +infinity.
 *
 * # Safety
 * `layer` must be valid, the tensors live, and `out` must hold 5 writable
 * doubles.
 */
enum TclStatus tcl_potential(const struct TclLayer *layer,
                             const struct TclTensor *weights,
                             const struct TclTensor *activations,
                             double *out);

/**
 * Dense convolution reference. `out_len` must equal Ox*Oy*K; the output is
 * written window-row-major. Accumulator overflow reports `Panic`.
 *
 * # Safety
 * `layer` must be valid, the tensors live, and `out` must hold `out_len`
 * writable i32 values.
 */
enum TclStatus tcl_dense_conv(const struct TclLayer *layer,
                              const struct TclTensor *weights,
                              const struct TclTensor *activations,
                              int32_t *out,
                              size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TCLSIM_H */
