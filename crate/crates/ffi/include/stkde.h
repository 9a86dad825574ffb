#ifndef STKDE_H
#define STKDE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  STKDE_STATUS_OK = 0,
  /**
   * File I/O failure or malformed input data.
   */
  STKDE_STATUS_IO = 1,
  /**
   * Invalid parameter (bad algorithm name, decomposition, domain, point).
   */
  STKDE_STATUS_VALIDATION = 2,
  /**
   * A memory estimate exceeded the configured budget; nothing ran.
   */
  STKDE_STATUS_MEM_BUDGET = 3,
  STKDE_STATUS_NULL_POINTER = 5,
  STKDE_STATUS_UTF8 = 6,
  /**
   * A panic was caught at the FFI boundary.
   */
  STKDE_STATUS_PANIC = 7,
} StkdeStatus;

/**
 * Opaque domain grid (world box, resolutions, bandwidths).
 */
typedef struct StkdeGrid StkdeGrid;

/**
 * Opaque point set.
 */
typedef struct StkdePoints StkdePoints;

/**
 * Opaque run result: the density volume plus the run statistics.
 */
typedef struct StkdeResult StkdeResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message of this thread, or NULL. Caller frees the returned
 * string with [`stkde_string_free`].
 */
char *stkde_last_error_message(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from an stkde call and not have been freed already.
 */
void stkde_string_free(char *s);

/**
 * Library version as a static string; do not free.
 */
const char *stkde_version(void);

/**
 * Creates a grid over the half-open box `[origin, origin + extent)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
StkdeStatus stkde_grid_new(double x0,
                           double y0,
                           double t0,
                           double extent_x,
                           double extent_y,
                           double extent_t,
                           double sres,
                           double tres,
                           double hs,
                           double ht,
                           StkdeGrid **out);

/**
 * Voxel counts of the grid.
 *
 * # Safety
 * All pointers must be valid.
 */
StkdeStatus stkde_grid_dims(const StkdeGrid *grid, size_t *nx, size_t *ny, size_t *nt);

/**
 * # Safety
 * `grid` must come from [`stkde_grid_new`] and not have been freed already.
 */
void stkde_grid_free(StkdeGrid *grid);

/**
 * Builds a point set from `n` (x, y, t) triples laid out row-major.
 * Coordinates must be finite.
 *
 * # Safety
 * `xyt` must point to `3·n` readable doubles; `out` must be valid.
 */
StkdeStatus stkde_points_from_array(const double *xyt, size_t n, StkdePoints **out);

/**
 * Loads a 3-column x,y,t CSV and applies the out-of-domain policy
 * (`fail_on_oob != 0` fails, otherwise skips and counts into `skipped`).
 *
 * # Safety
 * `path` must be a valid C string; `grid`, `out`, `skipped` valid pointers.
 */
StkdeStatus stkde_points_from_csv(const char *path,
                                  const StkdeGrid *grid,
                                  int fail_on_oob,
                                  StkdePoints **out,
                                  size_t *skipped);

/**
 * Deterministic synthetic point set inside the grid's domain box.
 *
 * # Safety
 * `grid` and `out` must be valid pointers.
 */
StkdeStatus stkde_points_synthetic(size_t n,
                                   size_t clusters,
                                   double sigma_xy,
                                   double sigma_t,
                                   const StkdeGrid *grid,
                                   uint64_t seed,
                                   StkdePoints **out);

/**
 * # Safety
 * `points` must come from an stkde call and not have been freed already.
 */
size_t stkde_points_len(const StkdePoints *points);

/**
 * # Safety
 * `points` must come from an stkde call and not have been freed already.
 */
void stkde_points_free(StkdePoints *points);

/**
 * Runs an algorithm by CLI name ("vb", "pb-sym", "pb-sym-pd-sched", ...).
 * `dec_*` is the requested decomposition (pass 1,1,1 when unused),
 * `mem_budget` of 0 means unlimited. Points must lie inside the grid's
 * domain box.
 *
 * # Safety
 * `algo` must be a valid C string; handle and out pointers must be valid.
 */
StkdeStatus stkde_run(const char *algo,
                      const StkdePoints *points,
                      const StkdeGrid *grid,
                      size_t dec_a,
                      size_t dec_b,
                      size_t dec_c,
                      size_t threads,
                      uint64_t mem_budget,
                      StkdeResult **out);

/**
 * Voxel counts of the result volume.
 *
 * # Safety
 * All pointers must be valid.
 */
StkdeStatus stkde_result_dims(const StkdeResult *result, size_t *nx, size_t *ny, size_t *nt);

/**
 * Borrowed pointer to the densities, laid out `(x·G_y + y)·G_t + t`; valid
 * until the result is freed. `len` receives the element count.
 *
 * # Safety
 * `result` must be a live handle; `len` a valid pointer.
 */
const double *stkde_result_values(const StkdeResult *result, size_t *len);

/**
 * One density sample.
 *
 * # Safety
 * `result` must be a live handle; `value` a valid pointer.
 */
StkdeStatus stkde_result_value_at(const StkdeResult *result,
                                  size_t x,
                                  size_t y,
                                  size_t t,
                                  double *value);

/**
 * Writes the result volume as an STKDE1 file.
 *
 * # Safety
 * `result` must be a live handle; `path` a valid C string.
 */
StkdeStatus stkde_result_write_volume(const StkdeResult *result, const char *path);

/**
 * Run statistics as a JSON string (same schema as the CLI's --stats file).
 * Caller frees with [`stkde_string_free`]; NULL on error.
 *
 * # Safety
 * `result` must be a live handle.
 */
char *stkde_result_stats_json(const StkdeResult *result);

/**
 * # Safety
 * `result` must come from [`stkde_run`] and not have been freed already.
 */
void stkde_result_free(StkdeResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STKDE_H */
