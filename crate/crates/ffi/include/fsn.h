#ifndef FSN_H
#define FSN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. The first four match the exit codes of the `fsn` binary.
 */
typedef enum FsnStatus {
  FSN_STATUS_OK = 0,
  /**
   * Solved, but at least one verification check failed.
   */
  FSN_STATUS_VERIFICATION_FAILED = 1,
  /**
   * Empty stage constraint set or no solution of the global LCP.
   */
  FSN_STATUS_INFEASIBLE = 2,
  /**
   * Malformed input or a violated structural assumption.
   */
  FSN_STATUS_INVALID_INPUT = 3,
  FSN_STATUS_NULL_POINTER = 4,
  /**
   * Stage index or buffer length out of range.
   */
  FSN_STATUS_OUT_OF_RANGE = 5,
  /**
   * Internal panic caught at the boundary.
   */
  FSN_STATUS_INTERNAL = 6,
} FsnStatus;

typedef struct FsnGame FsnGame;

typedef struct FsnOutcome FsnOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Owned by the
 * library and valid until the next failing call on the same thread.
 */
const char *fsn_last_error_message(void);

/**
 * Parses a game from JSON and validates its structure.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FsnStatus fsn_game_from_json(const char *json, struct FsnGame **out);

/**
 * Builds the duopoly preset with common spillover `lambda`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum FsnStatus fsn_game_duopoly(double lambda, struct FsnGame **out);

/**
 * Writes the state dimension and horizon.
 *
 * # Safety
 * All pointers must be valid; `game` must come from this library.
 */
enum FsnStatus fsn_game_dims(const struct FsnGame *game, size_t *n, size_t *horizon);

/**
 * # Safety
 * `game` must be null or a handle from this library not yet freed.
 */
void fsn_game_free(struct FsnGame *game);

/**
 * Solves and verifies. On `Ok` or `VerificationFailed` an outcome handle
 * is written to `out`; otherwise `out` is set to null.
 *
 * # Safety
 * `game` must be a live handle and `out` a valid pointer.
 */
enum FsnStatus fsn_solve(const struct FsnGame *game, struct FsnOutcome **out);

/**
 * Re-verifies an outcome document against a game.
 *
 * # Safety
 * `game` must be a live handle, `outcome_json` NUL-terminated, `passed` valid.
 */
enum FsnStatus fsn_verify_json(const struct FsnGame *game, const char *outcome_json, bool *passed);

/**
 * Writes `[J1, J2]` to `costs`.
 *
 * # Safety
 * `outcome` must be a live handle and `costs` point to two doubles.
 */
enum FsnStatus fsn_outcome_costs(const struct FsnOutcome *outcome, double *costs);

/**
 * Whether every verification check passed.
 *
 * # Safety
 * `outcome` must be a live handle or null.
 */
bool fsn_outcome_verified(const struct FsnOutcome *outcome);

/**
 * Copies one stage of a series into `buf` (capacity `len`) and writes the
 * number of values to `written`. `series` takes an [`FsnSeries`] value.
 *
 * # Safety
 * `outcome` must be a live handle; `buf` must hold `len` doubles and
 * `written` be valid.
 */
enum FsnStatus fsn_outcome_series(const struct FsnOutcome *outcome,
                                  uint32_t series,
                                  size_t k,
                                  double *buf,
                                  size_t len,
                                  size_t *written);

/**
 * Serializes the outcome as JSON; release with [`fsn_string_free`].
 *
 * # Safety
 * `outcome` must be a live handle and `out` valid.
 */
enum FsnStatus fsn_outcome_to_json(const struct FsnOutcome *outcome, char **out);

/**
 * # Safety
 * `outcome` must be null or a handle from this library not yet freed.
 */
void fsn_outcome_free(struct FsnOutcome *outcome);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void fsn_string_free(char *s);

/**
 * Solves `0 ≤ Mz + q ⊥ z ≥ 0` by Lemke's method. `m` is row-major `d×d`.
 * Writes `z` and the pivot count; a secondary ray returns `Infeasible`.
 *
 * # Safety
 * `m` must hold `d*d` doubles, `q` and `z` hold `d` each, `pivots` valid.
 */
enum FsnStatus fsn_lcp_solve(size_t d, const double *m, const double *q, double *z, size_t *pivots);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FSN_H */
