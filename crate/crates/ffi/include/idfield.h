#ifndef IDFIELD_H
#define IDFIELD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the nonzero values match the CLI exit codes where they overlap.
 */
typedef enum {
  IDF_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8 or a buffer that is too small.
   */
  IDF_STATUS_INVALID_ARGUMENT = 1,
  IDF_STATUS_CONFIG = 2,
  IDF_STATUS_NUMERIC = 3,
  IDF_STATUS_IO = 4,
  IDF_STATUS_PANIC = 5,
} IdfStatus;

/**
 * Experiment configuration.
 */
typedef struct IdfConfig IdfConfig;

/**
 * Estimate of `g₀ = h·v₀` on the configured x-grid.
 */
typedef struct IdfEstimate IdfEstimate;

/**
 * Field sample on a lattice window.
 */
typedef struct IdfSample IdfSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated, truncated to
 * `len`). Returns the full message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t idf_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *idf_version(void);

/**
 * Reference configuration (d = 2, coefficients 1.3/0.2/0.1/0.1, Gaussian jumps).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
IdfStatus idf_config_default(IdfConfig **out);

/**
 * Parse and validate a JSON configuration; unknown keys are rejected.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
IdfStatus idf_config_from_json(const char *json, IdfConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library, not yet freed.
 */
void idf_config_free(IdfConfig *cfg);

/**
 * Simulate the configured field on its window, stream `rep` of `seed`.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
IdfStatus idf_simulate(const IdfConfig *cfg, uint64_t seed, uint64_t rep, IdfSample **out);

/**
 * Wrap caller-owned values (row-major, last index fastest) as a sample.
 *
 * # Safety
 * `dims` must point to `ndims` values and `values` to their product.
 */
IdfStatus idf_sample_from_values(const size_t *dims,
                                 size_t ndims,
                                 const double *values,
                                 int64_t mesh,
                                 IdfSample **out);

/**
 * Number of values in the sample.
 *
 * # Safety
 * `sample` must be a live handle and `len` a valid pointer.
 */
IdfStatus idf_sample_len(const IdfSample *sample, size_t *len);

/**
 * Copy the sample values into `buf`, which must hold at least `idf_sample_len` values.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
IdfStatus idf_sample_values(const IdfSample *sample, double *buf, size_t len);

/**
 * # Safety
 * `sample` must be null or a handle from this library, not yet freed.
 */
void idf_sample_free(IdfSample *sample);

/**
 * Run one estimator (`"plugin"`, `"fourier"` or `"onb"`) with smoothing as configured.
 *
 * # Safety
 * `cfg` and `sample` must be live handles, `method` a NUL-terminated string and `out`
 * a valid pointer.
 */
IdfStatus idf_estimate(const IdfConfig *cfg,
                       const char *method,
                       const IdfSample *sample,
                       IdfEstimate **out);

/**
 * Number of x-grid points of the estimate.
 *
 * # Safety
 * `est` must be a live handle and `len` a valid pointer.
 */
IdfStatus idf_estimate_len(const IdfEstimate *est, size_t *len);

/**
 * Copy grid nodes, estimate and true `g₀` into caller buffers of `len` doubles each;
 * any of the three may be null to skip it.
 *
 * # Safety
 * Non-null buffers must point to `len` writable doubles.
 */
IdfStatus idf_estimate_copy(const IdfEstimate *est,
                            double *x,
                            double *g0_hat,
                            double *g0_true,
                            size_t len);

/**
 * `‖g₀ - ĝ₀‖₂²` on the x-grid.
 *
 * # Safety
 * `est` must be a live handle and `mse` a valid pointer.
 */
IdfStatus idf_estimate_mse(const IdfEstimate *est, double *mse);

/**
 * # Safety
 * `est` must be null or a handle from this library, not yet freed.
 */
void idf_estimate_free(IdfEstimate *est);

/**
 * Contraction factor `e(f, h)` with automatic pivot; `volumes` may be null for unit
 * volumes, `signed_h` selects `x^β` over `|x|^β`.
 *
 * # Safety
 * `coeffs` (and `volumes` when non-null) must point to `n` doubles; `e` and `satisfied`
 * must be valid pointers.
 */
IdfStatus idf_contraction_factor(const double *coeffs,
                                 const double *volumes,
                                 size_t n,
                                 double beta,
                                 int signed_h,
                                 double *e,
                                 int *satisfied);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IDFIELD_H */
