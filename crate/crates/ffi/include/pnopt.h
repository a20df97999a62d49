#ifndef PNOPT_H
#define PNOPT_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PnoptStatus {
  PNOPT_STATUS_OK = 0,
  /**
   * A required pointer was NULL or a string was not UTF-8.
   */
  PNOPT_STATUS_INVALID_ARGUMENT = 1,
  PNOPT_STATUS_INVALID_PARAMETER = 2,
  PNOPT_STATUS_EMPTY_CONSTELLATION = 3,
  PNOPT_STATUS_ZERO_POWER = 4,
  PNOPT_STATUS_ORIGIN_POINT = 5,
  PNOPT_STATUS_INVALID_INDEX = 6,
  PNOPT_STATUS_PARSE = 7,
  PNOPT_STATUS_OPTIMIZATION = 8,
  PNOPT_STATUS_IO = 9,
  /**
   * Output buffer too small.
   */
  PNOPT_STATUS_BUFFER_TOO_SMALL = 10,
  PNOPT_STATUS_PANIC = 99,
} PnoptStatus;

typedef enum PnoptDetector {
  PNOPT_DETECTOR_GAP_D = 0,
  PNOPT_DETECTOR_LPN_D = 1,
  PNOPT_DETECTOR_EUCLIDEAN = 2,
} PnoptDetector;

typedef enum PnoptLikelihood {
  PNOPT_LIKELIHOOD_SNR = 0,
  PNOPT_LIKELIHOOD_PHN = 1,
} PnoptLikelihood;

typedef enum PnoptCriterion {
  PNOPT_CRITERION_SEP_A = 0,
  PNOPT_CRITERION_MI_A = 1,
  PNOPT_CRITERION_MI_B = 2,
} PnoptCriterion;

/**
 * Opaque constellation handle.
 */
typedef struct PnoptConstellation PnoptConstellation;

/**
 * Opaque channel parameter handle.
 */
typedef struct PnoptParams PnoptParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *pnopt_version(void);

/**
 * Message of the last failure on the calling thread, or NULL if none.
 * Valid until the next failing call on this thread.
 */
const char *pnopt_last_error_message(void);

/**
 * Builds a constellation from `m` interleaved `(re, im)` pairs, scaled to
 * average power `power`.
 *
 * # Safety
 * `re_im` must point to `2*m` doubles; `out` must be writable.
 */
enum PnoptStatus pnopt_constellation_new(const double *re_im,
                                         size_t m,
                                         double power,
                                         struct PnoptConstellation **out);

/**
 * Builtin constellation by name: `psk`, `qam`, `spiral-qam`,
 * `apsk:<n1,n2,...>` or `file:<path>`, at unit power.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum PnoptStatus pnopt_constellation_builtin(const char *name,
                                             size_t m,
                                             struct PnoptConstellation **out);

/**
 * Reads a JSON or CSV constellation file as stored, without rescaling.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PnoptStatus pnopt_constellation_read(const char *path, struct PnoptConstellation **out);

/**
 * Number of points; 0 for NULL.
 *
 * # Safety
 * `c` must be NULL or a live handle.
 */
size_t pnopt_constellation_len(const struct PnoptConstellation *c);

/**
 * Power budget; 0 for NULL.
 *
 * # Safety
 * `c` must be NULL or a live handle.
 */
double pnopt_constellation_power(const struct PnoptConstellation *c);

/**
 * Copies the points as interleaved `(re, im)` pairs into `buf`, which holds
 * `cap` doubles. Returns `PNOPT_STATUS_BUFFER_TOO_SMALL` when `cap < 2*M`.
 *
 * # Safety
 * `c` must be a live handle; `buf` must hold `cap` doubles.
 */
enum PnoptStatus pnopt_constellation_points(const struct PnoptConstellation *c,
                                            double *buf,
                                            size_t cap);

/**
 * Releases a constellation handle.
 *
 * # Safety
 * `c` must be NULL or a handle not yet freed.
 */
void pnopt_constellation_free(struct PnoptConstellation *c);

/**
 * Channel with phase-noise variance `sigma_p2` (rad²) and noise density `n0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PnoptStatus pnopt_params_new(double sigma_p2, double n0, struct PnoptParams **out);

/**
 * Channel from Eb/N0 in dB for an `m`-point constellation of power `power`.
 *
 * # Safety
 * `out` must be writable.
 */
enum PnoptStatus pnopt_params_from_eb_n0(double sigma_p2,
                                         double eb_n0_db,
                                         size_t m,
                                         double power,
                                         struct PnoptParams **out);

/**
 * Noise density; NaN for NULL.
 *
 * # Safety
 * `p` must be NULL or a live handle.
 */
double pnopt_params_n0(const struct PnoptParams *p);

/**
 * Releases a parameter handle.
 *
 * # Safety
 * `p` must be NULL or a handle not yet freed.
 */
void pnopt_params_free(struct PnoptParams *p);

/**
 * Index of the symbol chosen for the received sample `(re, im)`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum PnoptStatus pnopt_detect(const struct PnoptConstellation *c,
                              const struct PnoptParams *p,
                              enum PnoptDetector kind,
                              double re,
                              double im,
                              size_t *out);

/**
 * Union bound on the GAP-D symbol error probability. `raw` (optional) gets
 * the unclipped sum.
 *
 * # Safety
 * Handles must be live; `value` must be writable; `raw` may be NULL.
 */
enum PnoptStatus pnopt_sep_union_bound(const struct PnoptConstellation *c,
                                       const struct PnoptParams *p,
                                       double *value,
                                       double *raw);

/**
 * High-SNR error floor at phase-noise variance `sigma_p2`.
 *
 * # Safety
 * `c` must be live; `out` must be writable.
 */
enum PnoptStatus pnopt_sep_floor(const struct PnoptConstellation *c, double sigma_p2, double *out);

/**
 * Mutual information (bits) of the GAP-D decision channel.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum PnoptStatus pnopt_mi_dd(const struct PnoptConstellation *c,
                             const struct PnoptParams *p,
                             double *out);

/**
 * Continuous-output mutual information (bits) under `kind`, on an
 * `n_r × n_phi` polar grid (0 for either selects the default resolution).
 * `error_estimate` may be NULL.
 *
 * # Safety
 * Handles must be live; `bits` must be writable.
 */
enum PnoptStatus pnopt_mi_dc(const struct PnoptConstellation *c,
                             const struct PnoptParams *p,
                             enum PnoptLikelihood kind,
                             size_t n_r,
                             size_t n_phi,
                             double *bits,
                             double *error_estimate);

/**
 * Design objective in minimization sense: the SEP bound, `-I_DD` or `-I_DC`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum PnoptStatus pnopt_objective(const struct PnoptConstellation *c,
                                 const struct PnoptParams *p,
                                 enum PnoptCriterion crit,
                                 double *out);

/**
 * Monte Carlo symbol error rate with its standard error (`std_error` may be NULL).
 *
 * # Safety
 * Handles must be live; `estimate` must be writable.
 */
enum PnoptStatus pnopt_empirical_sep(const struct PnoptConstellation *c,
                                     const struct PnoptParams *p,
                                     enum PnoptDetector kind,
                                     uint64_t n_samples,
                                     uint64_t seed,
                                     double *estimate,
                                     double *std_error);

/**
 * Multi-start design of an `m`-point unit-power constellation. Writes a new
 * handle to `out` and its objective to `value` (may be NULL).
 *
 * # Safety
 * `p` must be live; `out` must be writable.
 */
enum PnoptStatus pnopt_optimize_global(const struct PnoptParams *p,
                                       enum PnoptCriterion crit,
                                       size_t m,
                                       size_t n_starts,
                                       size_t max_iterations,
                                       uint64_t seed,
                                       struct PnoptConstellation **out,
                                       double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PNOPT_H */
