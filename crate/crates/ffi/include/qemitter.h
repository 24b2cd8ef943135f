#ifndef QEMITTER_H
#define QEMITTER_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QeStatus {
  QE_STATUS_OK = 0,
  QE_STATUS_DOMAIN = 1,
  QE_STATUS_USAGE = 2,
  QE_STATUS_NUMERICAL = 3,
  QE_STATUS_DEGENERATE = 4,
  QE_STATUS_RANK_DEFICIENT = 5,
  QE_STATUS_CONFIG = 6,
  QE_STATUS_IO = 7,
  QE_STATUS_CSV = 8,
  QE_STATUS_NULL_POINTER = 9,
  QE_STATUS_BUFFER_TOO_SMALL = 10,
  QE_STATUS_PANIC = 11,
} QeStatus;

/**
 * Opaque emitter handle. Create with [`qe_emitter_new`], release with
 * [`qe_emitter_free`].
 */
typedef struct QeEmitter QeEmitter;

/**
 * Lifetime fit of A·exp(−t/T₁) + B.
 */
typedef struct QeLifetimeFit {
  double amplitude;
  double t1;
  double background;
  double amplitude_sigma;
  double t1_sigma;
  double background_sigma;
  double reduced_chi2;
  bool converged;
} QeLifetimeFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a
 * successful one. The pointer is valid until the next call on this thread.
 */
const char *qe_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qe_version(void);

/**
 * Create an emitter. `t2_star <= 0` disables spectral diffusion.
 *
 * # Safety
 * `out_handle` must be a valid pointer to writable storage for one handle.
 */
enum QeStatus qe_emitter_new(double t1,
                             double gamma_pd_intrinsic,
                             double gamma_pd_laser,
                             double t2_star,
                             struct QeEmitter **out_handle);

/**
 * Release a handle from [`qe_emitter_new`]. NULL is ignored.
 *
 * # Safety
 * `handle` must come from [`qe_emitter_new`] and not have been freed.
 */
void qe_emitter_free(struct QeEmitter *handle);

/**
 * Ensemble-averaged excited population during a resonant pulse at
 * saturation `s`, sampled at `bins` bin centres over `[0, pulse_length]`.
 * `hermite_nodes` sets the spectral-diffusion quadrature order.
 *
 * # Safety
 * `handle` must be live; `out_times` and `out_population` must each point
 * to `capacity` writable doubles.
 */
enum QeStatus qe_simulate_rabi(const struct QeEmitter *handle,
                               double s,
                               double pulse_length,
                               size_t bins,
                               size_t hermite_nodes,
                               double *out_times,
                               double *out_population,
                               size_t capacity);

/**
 * HOM visibility of consecutive photons from one emitter. A non-finite or
 * non-positive `window` means an unbounded collection window.
 *
 * # Safety
 * `out_visibility` must point to one writable double.
 */
enum QeStatus qe_hom_visibility(double t1, double gamma_pd, double window, double *out_visibility);

/**
 * g²(0) implied by a signal-to-background ratio.
 *
 * # Safety
 * `out_g2` must point to one writable double.
 */
enum QeStatus qe_g2_from_sbr(double sbr, double *out_g2);

/**
 * Raw visibility from co- and cross-polarised coincidence probabilities.
 *
 * # Safety
 * `out_visibility` must point to one writable double.
 */
enum QeStatus qe_raw_visibility(double p_parallel, double p_perpendicular, double *out_visibility);

/**
 * Visibility corrected for interferometer imperfections.
 *
 * # Safety
 * `out_visibility` must point to one writable double.
 */
enum QeStatus qe_corrected_visibility(double v_raw,
                                      double epsilon,
                                      double g2_zero,
                                      double delta2,
                                      double *out_visibility);

/**
 * Fit a lifetime trace given `n_bins + 1` bin edges and `n_bins` counts.
 *
 * # Safety
 * `bin_edges` must point to `n_bins + 1` doubles, `counts` to `n_bins`
 * doubles and `out_fit` to one writable [`QeLifetimeFit`].
 */
enum QeStatus qe_fit_lifetime(const double *bin_edges,
                              const double *counts,
                              size_t n_bins,
                              struct QeLifetimeFit *out_fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QEMITTER_H */
