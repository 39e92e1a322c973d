/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef GLC_H
#define GLC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GlcStatus {
  GLC_STATUS_OK = 0,
  /**
   * A required pointer was null or a string was not UTF-8.
   */
  GLC_STATUS_NULL_OR_INVALID = 1,
  /**
   * The configuration was rejected; the message names the key.
   */
  GLC_STATUS_CONFIG = 2,
  /**
   * Physical outcome: supercritical current, no contraction, corrector divergence or delta guard.
   */
  GLC_STATUS_PHYSICAL = 3,
  /**
   * Linear or eigen solver failure and other numerical faults.
   */
  GLC_STATUS_NUMERICAL = 4,
  /**
   * The destination buffer is too small.
   */
  GLC_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * A bug inside the library; the message holds the panic payload.
   */
  GLC_STATUS_PANIC = 6,
} GlcStatus;

typedef enum GlcFieldKind {
  GLC_FIELD_KIND_DENSITY = 0,
  GLC_FIELD_KIND_PHASE = 1,
  GLC_FIELD_KIND_POTENTIAL = 2,
  GLC_FIELD_KIND_LEADING_ORDER_DENSITY = 3,
} GlcFieldKind;

typedef enum GlcVerdict {
  GLC_VERDICT_STABLE = 0,
  GLC_VERDICT_UNSTABLE = 1,
  GLC_VERDICT_MARGINAL = 2,
} GlcVerdict;

/**
 * Parsed and validated run configuration.
 */
typedef struct GlcConfig GlcConfig;

/**
 * Converged steady state together with its grid and current profile.
 */
typedef struct GlcSteady GlcSteady;

typedef struct GlcSteadySummary {
  size_t nx;
  size_t ny;
  double delta;
  size_t picard_iterations;
  /**
   * Largest contraction ratio; zero when the first iterate already converged.
   */
  double max_ratio;
  double h_norm_final;
  double residual_max;
  double gauge_relative;
} GlcSteadySummary;

typedef struct GlcStabilitySummary {
  double min_re_nongauge;
  double gauge_re;
  double gauge_im;
  double max_residual;
  enum GlcVerdict verdict;
} GlcStabilitySummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GlcStatus glc_config_from_toml(const char *text, struct GlcConfig **out);

/**
 * # Safety
 * `cfg` must come from `glc_config_from_toml` and not be freed twice. Null is ignored.
 */
void glc_config_free(struct GlcConfig *cfg);

/**
 * Leading-order state plus Picard correction.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a valid pointer.
 */
enum GlcStatus glc_steady_solve(const struct GlcConfig *cfg, struct GlcSteady **out);

/**
 * # Safety
 * `s` must come from `glc_steady_solve` and not be freed twice. Null is ignored.
 */
void glc_steady_free(struct GlcSteady *s);

/**
 * # Safety
 * `s` must be a live steady handle and `out` a valid pointer.
 */
enum GlcStatus glc_steady_summary(const struct GlcSteady *s, struct GlcSteadySummary *out);

/**
 * Copies one cell field, row-major with x fastest, into `buf`.
 *
 * # Safety
 * `s` must be a live steady handle and `buf` must hold `len` doubles.
 */
enum GlcStatus glc_steady_copy_field(const struct GlcSteady *s,
                                     enum GlcFieldKind kind,
                                     double *buf,
                                     size_t len);

/**
 * Spectrum of the linearization at `s` with the settings of `cfg`.
 *
 * # Safety
 * Both handles must be live and `out` a valid pointer.
 */
enum GlcStatus glc_stability(const struct GlcConfig *cfg,
                             const struct GlcSteady *s,
                             struct GlcStabilitySummary *out);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to fit) and returns the full message length without the NUL.
 * Pass a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or hold `len` bytes.
 */
size_t glc_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *glc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLC_H */
