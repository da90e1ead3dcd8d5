#ifndef OCDIAG_H
#define OCDIAG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum OcdiagStatus {
  OCDIAG_STATUS_OK = 0,
  OCDIAG_STATUS_NULL_POINTER = 1,
  OCDIAG_STATUS_INVALID_UTF8 = 2,
  OCDIAG_STATUS_IO = 3,
  OCDIAG_STATUS_PARSE = 4,
  OCDIAG_STATUS_VERSION = 5,
  OCDIAG_STATUS_INVALID_ARGUMENT = 6,
  OCDIAG_STATUS_WIDTH_MISMATCH = 7,
  OCDIAG_STATUS_PANIC = 8,
} OcdiagStatus;

/**
 * Opaque trained forest.
 */
typedef struct OcdiagModel OcdiagModel;

/**
 * Diagnosis settings; obtain defaults from `ocdiag_diagnosis_config_default`.
 */
typedef struct OcdiagDiagnosisConfig {
  double source_rate;
  double target_rate;
  double fundamental_hz;
  size_t window_samples;
  size_t debounce_min_run;
  size_t confirm_windows;
  size_t fusion_min_support;
  /**
   * When false the phase is estimated from the first period.
   */
  bool has_phase;
  double phase_deg;
} OcdiagDiagnosisConfig;

/**
 * Outcome of `ocdiag_diagnose`.
 */
typedef struct OcdiagReport {
  uint8_t fault_bits;
  bool protection_signal;
  /**
   * Valid only when `protection_signal` is true.
   */
  double first_detect_time;
  size_t windows;
} OcdiagReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Load a model file. On success `*out` owns a handle for `ocdiag_model_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OcdiagStatus ocdiag_model_load(const char *path, struct OcdiagModel **out);

/**
 * Parse a model from the text of a model file.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OcdiagStatus ocdiag_model_parse(const char *text, struct OcdiagModel **out);

/**
 * Release a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void ocdiag_model_free(struct OcdiagModel *model);

/**
 * Number of features the model expects.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum OcdiagStatus ocdiag_model_width(const struct OcdiagModel *model, size_t *out);

/**
 * Classify one feature vector of `len` values.
 *
 * # Safety
 * `features` must point to `len` doubles; `out_label` must be valid.
 */
enum OcdiagStatus ocdiag_model_predict(const struct OcdiagModel *model,
                                       const double *features,
                                       size_t len,
                                       uint8_t *out_label);

struct OcdiagDiagnosisConfig ocdiag_diagnosis_config_default(void);

/**
 * Diagnose `n` uniformly spaced samples starting at `t0` seconds.
 * `config` may be null for the defaults.
 *
 * # Safety
 * `i_a`, `i_b` and `i_c` must each point to `n` doubles; `config` must be
 * null or valid; `out` must be valid.
 */
enum OcdiagStatus ocdiag_diagnose(const struct OcdiagModel *model,
                                  const double *i_a,
                                  const double *i_b,
                                  const double *i_c,
                                  size_t n,
                                  double sample_rate,
                                  double t0,
                                  const struct OcdiagDiagnosisConfig *config,
                                  struct OcdiagReport *out);

/**
 * Copy the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length plus
 * one, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ocdiag_last_error_message(char *buf, size_t len);

/**
 * Library version, a static NUL-terminated string.
 */
const char *ocdiag_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCDIAG_H */
