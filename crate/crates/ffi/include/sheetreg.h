#ifndef SHEETREG_H
#define SHEETREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_INVALID_ARGUMENT = 2,
  // The domain violates its geometric conditions.
  SR_STATUS_DOMAIN_ERROR = 3,
  // Model parameters or rectangle are inadmissible.
  SR_STATUS_MODEL_ERROR = 4,
  // Quadrature failed or a matrix is singular.
  SR_STATUS_NUMERICAL_ERROR = 5,
  // Malformed JSON, expression or UTF-8.
  SR_STATUS_PARSE_ERROR = 6,
  // A caller buffer is too small.
  SR_STATUS_BUFFER_TOO_SMALL = 7,
  // Unexpected internal failure.
  SR_STATUS_PANIC = 8,
} SrStatus;

typedef enum {
  SR_MODEL_KIND_WIENER = 0,
  SR_MODEL_KIND_STATIONARY_OU = 1,
  SR_MODEL_KIND_ZERO_START_OU = 2,
} SrModelKind;

// A validated observation domain.
typedef struct SrDomain SrDomain;

// The outcome of one estimation.
typedef struct SrEstimate SrEstimate;

// An ordered set of regressors.
typedef struct SrRegressors SrRegressors;

// Driving sheet; `alpha`, `beta`, `sigma` are ignored for Wiener.
typedef struct {
  SrModelKind kind;
  double alpha;
  double beta;
  double sigma;
} SrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *sr_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sr_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void sr_string_free(char *s);

// Disc of radius `r` centred at `(cx, cy)`.
//
// # Safety
// `out` must be a valid pointer.
SrStatus sr_domain_circle(double cx, double cy, double r, SrDomain **out);

// Domain from its JSON description, e.g.
// `{"kind":"circle","cx":6,"cy":6,"r":2}`.
//
// # Safety
// `json` must be NUL-terminated and `out` valid.
SrStatus sr_domain_from_json(const char *json, SrDomain **out);

// Whether `(s, t)` lies in the closed domain.
//
// # Safety
// `d` must be a live handle and `out` valid.
SrStatus sr_domain_contains(const SrDomain *d, double s, double t, bool *out);

// Writes `s_min, s_max, t_min, t_max` into `out[0..4]`.
//
// # Safety
// `d` must be a live handle and `out` hold 4 values.
SrStatus sr_domain_bounding_box(const SrDomain *d, double *out);

// # Safety
// `d` must come from this library and not have been freed.
void sr_domain_free(SrDomain *d);

// Regressors from a JSON array of expressions, e.g. `["s^2+t^2", "s*t"]`.
//
// # Safety
// `json` must be NUL-terminated and `out` valid.
SrStatus sr_regressors_from_json(const char *json, SrRegressors **out);

// Number of regressors, or 0 for a null handle.
//
// # Safety
// `r` must be null or a live handle.
size_t sr_regressors_count(const SrRegressors *r);

// # Safety
// `r` must come from this library and not have been freed.
void sr_regressors_free(SrRegressors *r);

// Fisher matrix, `p × p` row-major into `out` of capacity `len`.
//
// # Safety
// Handles must be live; `model` and `out` valid.
SrStatus sr_fisher(const SrModel *model,
                   const SrDomain *d,
                   const SrRegressors *r,
                   double *out,
                   size_t len);

// Simulates `Σ m_k g_k + noise_scale·noise` with an `n`-term KL expansion
// on `[0,s_max]×[0,t_max]` and estimates `m`.
//
// # Safety
// Handles must be live; `true_m` holds `p` values; `out` valid.
SrStatus sr_estimate_simulated(const SrModel *model,
                               const SrDomain *d,
                               const SrRegressors *r,
                               const double *true_m,
                               size_t p,
                               double s_max,
                               double t_max,
                               size_t n,
                               uint64_t seed,
                               double noise_scale,
                               SrEstimate **out);

// Number of estimated coefficients, or 0 for a null handle.
//
// # Safety
// `e` must be null or a live handle.
size_t sr_estimate_p(const SrEstimate *e);

// Writes `m̂` into `out` of capacity `len`.
//
// # Safety
// `e` must be live and `out` hold `len` values.
SrStatus sr_estimate_m_hat(const SrEstimate *e, double *out, size_t len);

// Writes the score `ζ` into `out` of capacity `len`.
//
// # Safety
// `e` must be live and `out` hold `len` values.
SrStatus sr_estimate_zeta(const SrEstimate *e, double *out, size_t len);

// Writes the covariance of `m̂`, row-major, into `out` of capacity `len`.
//
// # Safety
// `e` must be live and `out` hold `len` values.
SrStatus sr_estimate_covariance(const SrEstimate *e, double *out, size_t len);

// The full result as JSON; release with `sr_string_free`.
//
// # Safety
// `e` must be live and `out` valid.
SrStatus sr_estimate_to_json(const SrEstimate *e, char **out);

// # Safety
// `e` must come from this library and not have been freed.
void sr_estimate_free(SrEstimate *e);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHEETREG_H */
