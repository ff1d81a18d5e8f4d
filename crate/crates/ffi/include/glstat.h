#ifndef GLSTAT_H
#define GLSTAT_H

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum GlstatStatus {
  GLSTAT_STATUS_OK = 0,
  GLSTAT_STATUS_NULL_POINTER = 1,
  GLSTAT_STATUS_INVALID_ARGUMENT = 2,
  GLSTAT_STATUS_DOMAIN = 3,
  GLSTAT_STATUS_INSUFFICIENT_DATA = 4,
  GLSTAT_STATUS_CAPACITY = 5,
  GLSTAT_STATUS_UNKNOWN_NAME = 6,
  GLSTAT_STATUS_DEGENERATE_DENSITY = 7,
  GLSTAT_STATUS_DEGENERATE_VARIANCE = 8,
  GLSTAT_STATUS_STATIONARITY = 9,
  GLSTAT_STATUS_CONFIG = 10,
  GLSTAT_STATUS_IO = 11,
  GLSTAT_STATUS_PANIC = 12,
} GlstatStatus;

// Opaque sample handle.
typedef struct GlstatSample GlstatSample;

// Opaque GL-statistic specification handle.
typedef struct GlstatSpec GlstatSpec;

// Output of [`glstat_lrv_gl`].
typedef struct GlstatVarianceReport {
  // Clamped at zero.
  double sigma2_gl;
  double sigma2_raw;
  // `m^2 * sigma2_gl`.
  double sigma2_scaled;
  double bandwidth;
  double statistic;
  // Nonzero when the raw estimate was negative.
  int32_t clamped;
} GlstatVarianceReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the calling thread's last failure. Valid until that thread's
// next failing call; empty when nothing failed yet.
const char *glstat_last_error(void);

// Library version as a static NUL-terminated string.
const char *glstat_version(void);

// Copies `len` finite values into a new sample handle.
//
// # Safety
// `values` must point to `len` readable doubles (may be null when `len` is 0)
// and `out_sample` to writable storage for one pointer.
enum GlstatStatus glstat_sample_new(const double *values,
                                    size_t len,
                                    struct GlstatSample **out_sample);

// # Safety
// `sample` must come from [`glstat_sample_new`] and not be freed twice.
void glstat_sample_free(struct GlstatSample *sample);

// Number of observations; 0 for a null handle.
//
// # Safety
// `sample` must be null or a live handle.
size_t glstat_sample_len(const struct GlstatSample *sample);

// GL representation of a catalog estimator (`gini`, `gini_os`, `q`, `c`,
// `lms`) at sample size `n`. `m = 0` and `alpha = NaN` select defaults.
//
// # Safety
// `name` must be a NUL-terminated string and `out_spec` writable.
enum GlstatStatus glstat_spec_from_estimator(const char *name,
                                             size_t n,
                                             size_t m,
                                             double alpha,
                                             struct GlstatSpec **out_spec);

// GL spec from the TOML spec-file format used by the command line.
//
// # Safety
// `toml_text` must be a NUL-terminated string and `out_spec` writable.
enum GlstatStatus glstat_spec_from_toml(const char *toml_text, struct GlstatSpec **out_spec);

// # Safety
// `spec` must come from a `glstat_spec_*` constructor and not be freed twice.
void glstat_spec_free(struct GlstatSpec *spec);

// Point estimate of a catalog estimator; Q with m = 3 uses the exact
// counting search.
//
// # Safety
// Pointers must be valid; `name` NUL-terminated.
enum GlstatStatus glstat_estimate(const struct GlstatSample *sample,
                                  const char *name,
                                  size_t m,
                                  double alpha,
                                  double *out_value);

// `T(H_n)` for a spec handle.
//
// # Safety
// Pointers must be valid.
enum GlstatStatus glstat_gl_statistic(const struct GlstatSample *sample,
                                      const struct GlstatSpec *spec,
                                      double *out_value);

// U-statistic of a built-in kernel; `m = 0` for kernels of fixed degree.
//
// # Safety
// Pointers must be valid; `kernel_name` NUL-terminated.
enum GlstatStatus glstat_u_statistic(const struct GlstatSample *sample,
                                     const char *kernel_name,
                                     size_t m,
                                     double *out_value);

// Bartlett long-run variance of a U-statistic; `bandwidth <= 0` selects
// `floor(n^{1/3})`.
//
// # Safety
// Pointers must be valid; `kernel_name` NUL-terminated.
enum GlstatStatus glstat_lrv_ustat(const struct GlstatSample *sample,
                                   const char *kernel_name,
                                   size_t m,
                                   double bandwidth,
                                   double *out_value);

// Bartlett long-run variance of a GL-statistic.
//
// # Safety
// Pointers must be valid.
enum GlstatStatus glstat_lrv_gl(const struct GlstatSample *sample,
                                const struct GlstatSpec *spec,
                                double bandwidth,
                                struct GlstatVarianceReport *out_report);

// Asymptotic interval `T ± z m σ̂ / √n` at `level` in (0, 1).
//
// # Safety
// Pointers must be valid.
enum GlstatStatus glstat_confidence_interval(const struct GlstatSample *sample,
                                             const struct GlstatSpec *spec,
                                             double level,
                                             double bandwidth,
                                             double *out_lo,
                                             double *out_hi);

// Writes `n` values of an EGARCH(1,1) path with AR(1) innovations
// (`rho = 0.8`) for `scenario` 1 or 2 into `out_values`.
//
// # Safety
// `out_values` must point to `n` writable doubles.
enum GlstatStatus glstat_simulate_egarch(uint32_t scenario,
                                         size_t n,
                                         size_t burn_in,
                                         uint64_t seed,
                                         double *out_values);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLSTAT_H */
