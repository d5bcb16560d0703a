#ifndef GMEASURE_H
#define GMEASURE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum GmStatus {
  GM_STATUS_OK = 0,
  GM_STATUS_NULL_POINTER = 1,
  GM_STATUS_INVALID_INPUT = 2,
  GM_STATUS_UNSUPPORTED = 3,
  GM_STATUS_PANIC = 4,
} GmStatus;

// Opaque g-function handle. Create with one of the `gm_gfunction_new_*`
// functions and release with [`gm_gfunction_free`].
typedef struct GmGFunction GmGFunction;

// Block variation and its bounds, see [`gm_rho_block`].
typedef struct GmRhoRecord {
  double exact;
  double bound_log;
  double bound_sqrt;
  double bound_w;
  double h;
  double slack;
  // Nonzero when `bound_w` is only asymptotic.
  uint8_t w_caveat;
  // Nonzero when `exact` and `h` are attained suprema.
  uint8_t attained;
} GmRhoRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string. The
// pointer stays valid until the next failing call on the same thread.
const char *gm_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *gm_version(void);

// Finite-memory g-function over `alphabet` symbols. `values` holds
// `alphabet^memory` rows of `alphabet` entries: row `h` lists `g(a . h)`
// for `a = 0 .. alphabet - 1`, where `h` encodes the history with its most
// recent symbol as the most significant digit.
//
// # Safety
// `values` must point to `len` doubles and `out` to writable storage.
enum GmStatus gm_gfunction_new_table(size_t alphabet,
                                     size_t memory,
                                     const double *values,
                                     size_t len,
                                     struct GmGFunction **out);

// Binary Markov g-function with `g(1 | 1) = p11` and `g(1 | 0) = p10`.
//
// # Safety
// `out` must point to writable storage.
enum GmStatus gm_gfunction_new_binary_markov(double p11, double p10, struct GmGFunction **out);

// Binary logistic g-function with couplings `theta[0..n]` for lags
// `1..=n`, `tail_bound >= sum_{k > n} |theta_k|`, evaluated at `depth`.
//
// # Safety
// `theta` must point to `n` doubles and `out` to writable storage.
enum GmStatus gm_gfunction_new_logistic(double theta0,
                                        const double *theta,
                                        size_t n,
                                        double tail_bound,
                                        size_t depth,
                                        struct GmGFunction **out);

// Release a handle; null is ignored.
//
// # Safety
// `g` must come from a `gm_gfunction_new_*` call and not be freed twice.
void gm_gfunction_free(struct GmGFunction *g);

// `g(word)`, where `word[0]` is the new symbol and the rest its past.
//
// # Safety
// `word` must point to `len` symbols.
enum GmStatus gm_gfunction_eval(const struct GmGFunction *g,
                                const size_t *word,
                                size_t len,
                                double *out);

// `var_n log g` (exact for tables, an upper bound for logistic families).
//
// # Safety
// `g` must be a live handle and `out` writable.
enum GmStatus gm_gfunction_variation(const struct GmGFunction *g, size_t n, double *out);

// `delta_bar` of block lengths `b` and rates `r`, both of length `levels`.
//
// # Safety
// `b` and `r` must point to `levels` entries.
enum GmStatus gm_delta_bar(const size_t *b, const double *r, size_t levels, double *out);

// Limit `sum a_j / E[T_1]` of the renewal equation of the pair.
//
// # Safety
// `b` and `r` must point to `levels` entries.
enum GmStatus gm_renewal_limit(const size_t *b, const double *r, size_t levels, double *out);

// Frequency of `Y_n <= 0` over `steps` transitions of the dominating chain.
//
// # Safety
// `b` and `r` must point to `levels` entries.
enum GmStatus gm_simulate_y_frequency(const size_t *b,
                                      const double *r,
                                      size_t levels,
                                      size_t steps,
                                      uint64_t seed,
                                      double *out);

// Worst-case block Hellinger distance `h(B, b)`.
//
// # Safety
// `g` must be a live handle and `out` writable.
enum GmStatus gm_h_block(const struct GmGFunction *g, size_t big_b, size_t b, double *out);

// Coupling block variation `rho(B, b)` with its Hellinger bounds.
//
// # Safety
// `g` must be a live handle and `out` writable.
enum GmStatus gm_rho_block(const struct GmGFunction *g,
                           size_t big_b,
                           size_t b,
                           struct GmRhoRecord *out);

// Ultrametric Wasserstein distance of two depth-`depth` cylinder measures
// given as `alphabet^depth` masses each.
//
// # Safety
// `mu` and `nu` must point to `len` doubles.
enum GmStatus gm_wasserstein_ultra(size_t alphabet,
                                   size_t depth,
                                   const double *mu,
                                   const double *nu,
                                   size_t len,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GMEASURE_H */
