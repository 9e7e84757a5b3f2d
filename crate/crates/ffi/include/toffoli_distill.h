#ifndef TOFFOLI_DISTILL_H
#define TOFFOLI_DISTILL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TdStatus {
  TD_STATUS_OK = 0,
  TD_STATUS_NULL_POINTER = 1,
  TD_STATUS_INVALID_ARGUMENT = 2,
  TD_STATUS_ABOVE_THRESHOLD = 3,
  TD_STATUS_UNREACHABLE = 4,
  TD_STATUS_CAP_EXCEEDED = 5,
  TD_STATUS_INTERNAL = 6,
} TdStatus;

/**
 * Opaque progressive schedule.
 */
typedef struct TdSchedule TdSchedule;

typedef struct TdLevel {
  double log10_n;
  double log10_eps;
  double log10_eps_star;
} TdLevel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *td_last_error_message(void);

/**
 * Library version, static storage.
 */
const char *td_version(void);

/**
 * `alpha3 = (1 - P) / (1 + P)` with `P = (1 - 2p)^n`.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum TdStatus td_alpha3_decoherent(size_t n, double p, double *out);

/**
 * `3 / (3 + alpha3^(2^levels))`.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum TdStatus td_fidelity_after(double alpha3, uint32_t levels, double *out);

/**
 * Combine success probability for two diagonal inputs.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum TdStatus td_success_probability(double alpha3_left, double alpha3_right, double *out);

/**
 * Expected operations `G(levels)` for constant success probability `p`.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum TdStatus td_expected_ops(uint32_t levels, double p, double ratio, double *out);

/**
 * # Safety
 * `out` must be valid for a write of one `uint64_t`.
 */
enum TdStatus td_majority_repeats(double eps, double eps_m, uint64_t *out);

/**
 * `(1/p) ln(1/p)`.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum TdStatus td_max_block_size(double p, double *out);

/**
 * `log10 eps_out` for one level of block size `n`.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum TdStatus td_block_failure(double log10_eps_in,
                               double n,
                               double p_c,
                               double k,
                               double beta,
                               double *out);

/**
 * Exhaustive eigenstring check of the bitwise measurement circuit.
 *
 * # Safety
 * `passed` and `total` must be valid for a write of one `size_t` each.
 */
enum TdStatus td_verify_eq5(size_t n, size_t *passed, size_t *total);

/**
 * Smallest fidelity with the direct Toffoli over all 8 branches, the 8
 * basis inputs and `random_inputs` seeded random inputs.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum TdStatus td_gadget_min_fidelity(size_t random_inputs, uint64_t seed, double *out);

/**
 * Monte Carlo `alpha3` from `trials` raw preparations with a uniform
 * bit-flip channel on an `n`-qubit cat.
 *
 * # Safety
 * `estimate` and `stderr` must be valid for a write of one `double` each.
 */
enum TdStatus td_estimate_alpha3(size_t n,
                                 double p,
                                 uint64_t trials,
                                 uint64_t seed,
                                 double *estimate,
                                 double *stderr);

/**
 * Builds a progressive schedule. With `pin_reference_sizes` the first two
 * block sizes are fixed at 1000 and 2e7; otherwise every level uses the
 * block-size bound. `p_c`, `k`, `beta` of zero select the defaults.
 *
 * # Safety
 * `out` must be valid for a write of one pointer. The returned handle must
 * be released with `td_schedule_free`.
 */
enum TdStatus td_schedule_new(double log10_target,
                              double log10_eps0_star,
                              double p_c,
                              double k,
                              double beta,
                              bool pin_reference_sizes,
                              struct TdSchedule **out);

/**
 * Number of levels, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle from `td_schedule_new`.
 */
size_t td_schedule_len(const struct TdSchedule *h);

/**
 * Level `index` (0-based) of the schedule.
 *
 * # Safety
 * `h` must be a live handle; `out` must be valid for one `TdLevel` write.
 */
enum TdStatus td_schedule_level(const struct TdSchedule *h, size_t index, struct TdLevel *out);

/**
 * # Safety
 * `h` must be null or a handle from `td_schedule_new` not yet freed.
 */
void td_schedule_free(struct TdSchedule *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOFFOLI_DISTILL_H */
