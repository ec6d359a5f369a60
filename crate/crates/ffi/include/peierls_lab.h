#ifndef PEIERLS_LAB_H
#define PEIERLS_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by all functions.
 */
typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_INVALID_ARGUMENT = 2,
  PL_STATUS_INVALID_LATTICE = 3,
  PL_STATUS_DIMENSION_MISMATCH = 4,
  PL_STATUS_UNKNOWN_NAME = 5,
  PL_STATUS_CHART_OVERFLOW = 6,
  PL_STATUS_NOT_NORMALLY_HYPERBOLIC = 7,
  PL_STATUS_UNSTABLE = 8,
  PL_STATUS_BUFFER_TOO_SMALL = 9,
  PL_STATUS_INTERNAL = 10,
} PlStatus;

/**
 * Values accepted by the `kind` argument of [`pl_green_apply`].
 */
typedef enum PlGreenKind {
  PL_GREEN_KIND_RETARDED = 0,
  PL_GREEN_KIND_ADVANCED = 1,
  PL_GREEN_KIND_CAUSAL = 2,
} PlGreenKind;

/**
 * Opaque lattice handle.
 */
typedef struct PlLattice PlLattice;

/**
 * Opaque model handle: a Lagrangian linearized at a background field.
 */
typedef struct PlModel PlModel;

/**
 * Peierls bracket of two linear functionals and its two constituent products.
 */
typedef struct PlBracket {
  double value;
  double retarded_product;
  double advanced_product;
} PlBracket;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pl_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t pl_last_error(char *buf, size_t len);

/**
 * Creates an `n_t x n_x` Minkowski lattice with spacings `dt`, `dx`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum PlStatus pl_lattice_new(size_t n_t, size_t n_x, double dt, double dx, struct PlLattice **out);

/**
 * Number of lattice sites, or 0 for a null handle.
 *
 * # Safety
 * `lat` must be null or a live handle.
 */
size_t pl_lattice_n_sites(const struct PlLattice *lat);

/**
 * # Safety
 * `lat` must be null or a handle from [`pl_lattice_new`] not yet freed.
 */
void pl_lattice_free(struct PlLattice *lat);

/**
 * Linearizes the Lagrangian `lagrangian` (`"free_scalar"`, `"wave_map"`,
 * `"kg_mass(m)"`) on target `target` (`"flat"` with `dim`, or `"sphere2"`) at the
 * background `values` (site-major, `n_sites * dim` entries).
 *
 * # Safety
 * `lat` must be a live handle, the strings NUL-terminated, `values` valid for
 * `len` reads and `out` valid for one write.
 */
enum PlStatus pl_model_new(const struct PlLattice *lat,
                           const char *lagrangian,
                           const char *target,
                           size_t dim,
                           const double *values,
                           size_t len,
                           struct PlModel **out);

/**
 * Length of the model's field vectors (`n_sites * dim`), or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t pl_model_len(const struct PlModel *model);

/**
 * # Safety
 * `model` must be null or a handle from [`pl_model_new`] not yet freed.
 */
void pl_model_free(struct PlModel *model);

/**
 * Applies the Green operator `kind` (a [`PlGreenKind`] value) to the density
 * `source`, writing `len` values to `out`.
 *
 * # Safety
 * `model` must be a live handle; `source` and `out` valid for `len` values.
 */
enum PlStatus pl_green_apply(const struct PlModel *model,
                             uint32_t kind,
                             const double *source,
                             double *out,
                             size_t len);

/**
 * Writes the Euler-Lagrange kernel of the background (density-weighted) to `out`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for `len` writes.
 */
enum PlStatus pl_el_kernel(const struct PlModel *model, double *out, size_t len);

/**
 * Bracket of `F = sum_x vol(x) f(x) . phi(x)` and `G` likewise with `g`,
 * at the model's background.
 *
 * # Safety
 * `model` must be a live handle; `f`, `g` valid for `len` reads; `out` for one write.
 */
enum PlStatus pl_bracket_linear(const struct PlModel *model,
                                const double *f,
                                const double *g,
                                size_t len,
                                struct PlBracket *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEIERLS_LAB_H */
