#ifndef STARRIS_H
#define STARRIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum StarrisStatus {
  STARRIS_STATUS_OK = 0,
  STARRIS_STATUS_NULL_POINTER = 1,
  STARRIS_STATUS_INVALID_UTF8 = 2,
  STARRIS_STATUS_CONFIG_PARSE = 3,
  STARRIS_STATUS_CONFIG_INVALID = 4,
  STARRIS_STATUS_SOLVE_FAILED = 5,
  STARRIS_STATUS_INVALID_ARGUMENT = 6,
  STARRIS_STATUS_PANIC = 7,
} StarrisStatus;

typedef enum StarrisPreset {
  STARRIS_PRESET_PAPER = 0,
  STARRIS_PRESET_DESK = 1,
} StarrisPreset;

typedef enum StarrisScheme {
  STARRIS_SCHEME_PROPOSED = 0,
  STARRIS_SCHEME_RABM = 1,
  STARRIS_SCHEME_RSV = 2,
  STARRIS_SCHEME_RABM_RSV = 3,
  STARRIS_SCHEME_FSTAR = 4,
} StarrisScheme;

/**
 * Opaque system configuration.
 */
typedef struct StarrisConfig StarrisConfig;

/**
 * Opaque solve result.
 */
typedef struct StarrisReport StarrisReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *starris_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *starris_version(void);

/**
 * Creates a configuration holding the preset's defaults.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum StarrisStatus starris_config_new(enum StarrisPreset base, struct StarrisConfig **out);

/**
 * Parses TOML text on top of a preset.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for one write.
 */
enum StarrisStatus starris_config_from_toml(const char *text,
                                            enum StarrisPreset base,
                                            struct StarrisConfig **out);

/**
 * Releases a configuration. NULL is ignored.
 *
 * # Safety
 * `cfg` must come from this library and must not be used afterwards.
 */
void starris_config_free(struct StarrisConfig *cfg);

/**
 * Sets the key of the random generator.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum StarrisStatus starris_config_set_seed(struct StarrisConfig *cfg, uint64_t seed);

/**
 * Writes `[M, N, U, Q]` into `dims`.
 *
 * # Safety
 * `cfg` must be a live handle and `dims` valid for four writes.
 */
enum StarrisStatus starris_config_dims(const struct StarrisConfig *cfg, size_t *dims);

/**
 * Draws the channels of `trial` and solves them with `which`.
 *
 * # Safety
 * `cfg` must be a live handle and `out` valid for one write.
 */
enum StarrisStatus starris_solve(const struct StarrisConfig *cfg,
                                 enum StarrisScheme which,
                                 uint64_t trial,
                                 struct StarrisReport **out);

/**
 * Releases a report. NULL is ignored.
 *
 * # Safety
 * `report` must come from this library and must not be used afterwards.
 */
void starris_report_free(struct StarrisReport *report);

/**
 * Final sum rate in bits/s/Hz.
 *
 * # Safety
 * `report` must be a live handle and `out` valid for one write.
 */
enum StarrisStatus starris_report_sum_rate(const struct StarrisReport *report, double *out);

/**
 * Number of outer iterations run.
 *
 * # Safety
 * `report` must be a live handle and `out` valid for one write.
 */
enum StarrisStatus starris_report_iterations(const struct StarrisReport *report, size_t *out);

/**
 * Copies the per-iteration sum rates into `buf`.
 *
 * `len` always receives the series length; pass `cap = 0` to query it.
 *
 * # Safety
 * `report` must be a live handle, `len` valid for one write and `buf`
 * valid for `cap` writes.
 */
enum StarrisStatus starris_report_trace(const struct StarrisReport *report,
                                        double *buf,
                                        size_t cap,
                                        size_t *len);

/**
 * Copies the final per-user powers (watts) into `buf`; same protocol as
 * [`starris_report_trace`].
 *
 * # Safety
 * As for [`starris_report_trace`].
 */
enum StarrisStatus starris_report_power(const struct StarrisReport *report,
                                        double *buf,
                                        size_t cap,
                                        size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STARRIS_H */
