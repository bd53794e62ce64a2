#ifndef SPARSEGRID_H
#define SPARSEGRID_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes.
 */
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_ARGUMENT = 2,
  SG_STATUS_NUMERICAL = 3,
  SG_STATUS_IO = 4,
  SG_STATUS_FORMAT = 5,
  SG_STATUS_BUFFER_TOO_SMALL = 6,
  SG_STATUS_PANIC = 7,
} SgStatus;

/*
 A sparse grid with its reduced knots.
 */
typedef struct SgGrid SgGrid;

/*
 Function called by `sg_quadrature_fn`: writes `outputs` values at the
 `dim` coordinates `y` into `out`, returning 0 on success.
 */
typedef int32_t (*SgCallback)(const double *y, size_t dim, double *out, size_t outputs, void *user);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failing call on this thread (empty if none).
 */
const char *sg_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *sg_version(void);

/*
 Builds the grid of `preset` ("TP", "TD", "HC", "SM") at level `w` with
 knot family `knots` (e.g. "cc", "leja", "gauss") whose parameters per
 dimension are `lower[n], upper[n]` (interval, or mean and deviation).

 # Safety
 String arguments must be NUL-terminated; `lower` and `upper` must hold
 `dim` values; `out` must be writable.
 */
enum SgStatus sg_grid_build(size_t dim,
                            const char *preset_name,
                            double w,
                            const char *knots,
                            const double *lower,
                            const double *upper,
                            struct SgGrid **out);

/*
 Loads a JSON grid file.

 # Safety
 `path` must be NUL-terminated and `out` writable.
 */
enum SgStatus sg_grid_load(const char *path, struct SgGrid **out);

/*
 Saves a grid as a JSON grid file.

 # Safety
 `g` must come from this library and `path` be NUL-terminated.
 */
enum SgStatus sg_grid_save(const struct SgGrid *g, const char *path);

/*
 Releases a grid; null is ignored.

 # Safety
 `g` must come from this library and not be used afterwards.
 */
void sg_grid_free(struct SgGrid *g);

/*
 Number of dimensions, 0 for null.

 # Safety
 `g` must be null or come from this library.
 */
size_t sg_grid_dim(const struct SgGrid *g);

/*
 Number of reduced knots, 0 for null.

 # Safety
 `g` must be null or come from this library.
 */
size_t sg_grid_size(const struct SgGrid *g);

/*
 Copies the `size * dim` reduced knot coordinates into `out`.

 # Safety
 `out` must hold `len` doubles.
 */
enum SgStatus sg_grid_knots(const struct SgGrid *g, double *out, size_t len);

/*
 Copies the `size` quadrature weights into `out`.

 # Safety
 `out` must hold `len` doubles.
 */
enum SgStatus sg_grid_weights(const struct SgGrid *g, double *out, size_t len);

/*
 Quadrature of `outputs` components whose values at the reduced knots are
 `values` (`size * outputs`, point-major); writes `outputs` results.

 # Safety
 Buffers must hold the stated number of doubles.
 */
enum SgStatus sg_quadrature(const struct SgGrid *g,
                            const double *values,
                            size_t outputs,
                            double *out);

/*
 Evaluates `f` at every reduced knot (sequentially, in knot order) and
 writes the `outputs` quadrature results.

 # Safety
 `out` must hold `outputs` doubles; `f` must honor its contract.
 */
enum SgStatus sg_quadrature_fn(const struct SgGrid *g,
                               SgCallback f,
                               size_t outputs,
                               void *user,
                               double *out);

/*
 Sparse interpolant of `values` (as in `sg_quadrature`) at `npoints`
 points (`npoints * dim`, point-major); writes `npoints * outputs` values.

 # Safety
 Buffers must hold the stated number of doubles.
 */
enum SgStatus sg_interpolate(const struct SgGrid *g,
                             const double *values,
                             size_t outputs,
                             const double *points,
                             size_t npoints,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSEGRID_H */
