#ifndef RWALK_H
#define RWALK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum RwalkStatus {
  RWALK_STATUS_OK = 0,
  RWALK_STATUS_NULL_ARGUMENT = 1,
  RWALK_STATUS_INVALID_UTF8 = 2,
  RWALK_STATUS_PARSE = 3,
  RWALK_STATUS_USAGE = 4,
  RWALK_STATUS_IO = 5,
  /**
   * The law fails a mathematical precondition (degenerate or reducible support).
   */
  RWALK_STATUS_PRECONDITION = 6,
  /**
   * A verification check ran and failed.
   */
  RWALK_STATUS_CHECK_FAILED = 7,
  /**
   * Any other numerical error.
   */
  RWALK_STATUS_NUMERICAL = 8,
  RWALK_STATUS_PANIC = 9,
} RwalkStatus;

/**
 * Opaque walk handle.
 */
typedef struct RwalkWalk RwalkWalk;

/**
 * Minimizer output. Only the first `dim` entries of `theta_star` are used.
 */
typedef struct RwalkSpectral {
  uint32_t dim;
  double theta_star[3];
  double rho;
  double r;
  double gradient_norm;
  uint64_t iterations;
} RwalkSpectral;

/**
 * Monte Carlo output.
 */
typedef struct RwalkSimulation {
  uint64_t trajectories;
  uint64_t horizon;
  uint64_t hits;
  double return_fraction;
  double ci_halfwidth;
  double drift_norm;
  double drift_bound;
} RwalkSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses walk-spec text into a new handle stored in `*out`.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RwalkStatus rwalk_walk_from_str(const char *text, struct RwalkWalk **out);

/**
 * Loads a walk-spec file into a new handle stored in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RwalkStatus rwalk_walk_from_file(const char *path, struct RwalkWalk **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `walk` must come from this library and not be used afterwards.
 */
void rwalk_walk_free(struct RwalkWalk *walk);

/**
 * Writes the walk-spec text of `walk` to `*out`.
 *
 * # Safety
 * `walk` must be a live handle and `out` a valid pointer.
 */
enum RwalkStatus rwalk_walk_to_string(const struct RwalkWalk *walk, char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void rwalk_string_free(char *s);

/**
 * Minimizes the moment-generating function.
 *
 * # Safety
 * `walk` must be a live handle and `out` a valid pointer.
 */
enum RwalkStatus rwalk_analyze(const struct RwalkWalk *walk, struct RwalkSpectral *out);

/**
 * Stores the tilted walk `R * phi * v` as a new handle in `*out`.
 *
 * # Safety
 * `walk` must be a live handle and `out` a valid pointer.
 */
enum RwalkStatus rwalk_tilt(const struct RwalkWalk *walk, struct RwalkWalk **out);

/**
 * Runs the checks named in `checks` (`"all"` or a comma-separated list;
 * null means all). Returns `CheckFailed` if any fails. When `report` is
 * not null the JSON report is stored there, also on check failure.
 *
 * # Safety
 * `walk` must be a live handle; `checks` null or a NUL-terminated string;
 * `report` null or a valid pointer.
 */
enum RwalkStatus rwalk_verify(const struct RwalkWalk *walk, const char *checks, char **report);

/**
 * Monte Carlo return fraction to the identity.
 *
 * # Safety
 * `walk` must be a live handle and `out` a valid pointer.
 */
enum RwalkStatus rwalk_simulate(const struct RwalkWalk *walk,
                                uint64_t trajectories,
                                uint64_t horizon,
                                uint64_t seed,
                                struct RwalkSimulation *out);

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library on the same thread.
 */
const char *rwalk_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *rwalk_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RWALK_H */
