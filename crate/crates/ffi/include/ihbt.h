#ifndef IHBT_H
#define IHBT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the non-zero values match the CLI exit codes.
 */
typedef enum IhbtStatus {
  IHBT_STATUS_OK = 0,
  IHBT_STATUS_NULL_POINTER = 1,
  IHBT_STATUS_USAGE = 2,
  IHBT_STATUS_CONFIG = 3,
  IHBT_STATUS_DATA_FORMAT = 4,
  IHBT_STATUS_NUMERICAL = 5,
  IHBT_STATUS_PANIC = 6,
} IhbtStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct IhbtConfig IhbtConfig;

/**
 * Opaque contrast model built from a configuration.
 */
typedef struct IhbtModel IhbtModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *ihbt_last_error(void);

/**
 * Built-in reference configuration.
 */
struct IhbtConfig *ihbt_config_reference(void);

/**
 * Load a TOML configuration.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum IhbtStatus ihbt_config_load(const char *path, struct IhbtConfig **out);

/**
 * Write the lowercase hex SHA-256 of the configuration (65 bytes with NUL)
 * into `buf`.
 *
 * # Safety
 * `config` must come from this library; `buf` must hold `len` bytes.
 */
enum IhbtStatus ihbt_config_hash(const struct IhbtConfig *config, char *buf, size_t len);

/**
 * # Safety
 * `config` must come from this library or be NULL.
 */
void ihbt_config_free(struct IhbtConfig *config);

/**
 * Ideal two-ion g²(0) at saturation `s` and phase `delta`.
 *
 * # Safety
 * `out` must be writable.
 */
enum IhbtStatus ihbt_g2_zero_analytic(double s, double delta, double *out);

/**
 * g²(0) with a motional fringe visibility `v`.
 *
 * # Safety
 * `out` must be writable.
 */
enum IhbtStatus ihbt_g2_visibility(double s, double delta, double v, double *out);

/**
 * Build the contrast model of a configuration.
 *
 * # Safety
 * `config` must come from this library; `out` must be writable.
 */
enum IhbtStatus ihbt_model_new(const struct IhbtConfig *config, struct IhbtModel **out);

/**
 * Predicted measured g²(0) at phase `delta`.
 *
 * # Safety
 * `model` must come from this library; `out` must be writable.
 */
enum IhbtStatus ihbt_model_g2_zero(const struct IhbtModel *model, double delta, double *out);

/**
 * # Safety
 * `model` must come from this library or be NULL.
 */
void ihbt_model_free(struct IhbtModel *model);

/**
 * Predicted g²(0) and its band at `n` slit positions (m).
 *
 * # Safety
 * `positions` must hold `n` values; `g2`, `low` and `high` must each hold
 * `n` values (`low` and `high` may be NULL).
 */
enum IhbtStatus ihbt_predict(const struct IhbtConfig *config,
                             const double *positions,
                             size_t n,
                             double *g2,
                             double *low,
                             double *high);

/**
 * Number of histogram bins for a bin width and window (s).
 *
 * # Safety
 * `out` must be writable.
 */
enum IhbtStatus ihbt_histogram_len(double bin, double window, size_t *out);

/**
 * Multi-start multi-stop coincidences of τ = t_b − t_a (picosecond tags)
 * into `counts`, which must hold `ihbt_histogram_len(bin, window)` values.
 *
 * # Safety
 * `a` and `b` must hold `na` and `nb` values; `counts` must hold `ncounts`.
 */
enum IhbtStatus ihbt_correlate(const uint64_t *a,
                               size_t na,
                               const uint64_t *b,
                               size_t nb,
                               double bin,
                               double window,
                               uint64_t *counts,
                               size_t ncounts);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IHBT_H */
