#ifndef GEOSCATTER_H
#define GEOSCATTER_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call.
 */
typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_ERR_NULL_POINTER = 1,
  GS_STATUS_ERR_IO = 2,
  GS_STATUS_ERR_PARSE = 3,
  GS_STATUS_ERR_INVALID_MESH = 4,
  GS_STATUS_ERR_NUMERICAL = 5,
  GS_STATUS_ERR_CONFIG = 6,
  GS_STATUS_ERR_DIMENSION = 7,
  GS_STATUS_ERR_PATH_CAP = 8,
  GS_STATUS_ERR_BUFFER_TOO_SMALL = 9,
  GS_STATUS_ERR_PANIC = 10,
} GsStatus;

/**
 * Eigenpairs of a mesh Laplacian together with its mass matrix.
 */
typedef struct GsBasis GsBasis;

/**
 * A validated triangle mesh.
 */
typedef struct GsMesh GsMesh;

/**
 * Scattering settings. `k = 0` uses every eigenpair of the basis.
 */
typedef struct GsScatterConfig {
  int32_t j_max;
  int32_t j_min;
  uint32_t depth;
  size_t k;
} GsScatterConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a
 * success. Valid until the next call on this thread.
 */
const char *gs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gs_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum GsStatus gs_mesh_icosphere(uint32_t subdivisions, double radius, struct GsMesh **out);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum GsStatus gs_mesh_torus(size_t n_major,
                            size_t n_minor,
                            double major_radius,
                            double minor_radius,
                            struct GsMesh **out);

/**
 * Builds a mesh from `3 * num_vertices` coordinates and `3 * num_faces`
 * vertex indices, validating it.
 *
 * # Safety
 * The arrays must hold the stated number of elements.
 */
enum GsStatus gs_mesh_from_arrays(const double *vertices,
                                  size_t num_vertices,
                                  const uint32_t *faces,
                                  size_t num_faces,
                                  struct GsMesh **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid handle slot.
 */
enum GsStatus gs_mesh_load_off(const char *path, struct GsMesh **out);

/**
 * Vertex count, or 0 for NULL.
 *
 * # Safety
 * `mesh` must be NULL or a live handle.
 */
size_t gs_mesh_num_vertices(const struct GsMesh *mesh);

/**
 * Face count, or 0 for NULL.
 *
 * # Safety
 * `mesh` must be NULL or a live handle.
 */
size_t gs_mesh_num_faces(const struct GsMesh *mesh);

/**
 * Copies the `3 * n_v` vertex coordinates into `out`.
 *
 * # Safety
 * `out` must have room for `capacity` doubles; `written` may be NULL.
 */
enum GsStatus gs_mesh_vertices(const struct GsMesh *mesh,
                               double *out,
                               size_t capacity,
                               size_t *written);

/**
 * # Safety
 * `mesh` must be NULL or a handle not yet freed.
 */
void gs_mesh_free(struct GsMesh *mesh);

/**
 * The `k` smallest eigenpairs (`k` is clamped to the vertex count).
 *
 * # Safety
 * `mesh` must be a live handle; `out` a valid handle slot.
 */
enum GsStatus gs_basis_compute(const struct GsMesh *mesh, size_t k, struct GsBasis **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid handle slot.
 */
enum GsStatus gs_basis_load(const char *path, struct GsBasis **out);

/**
 * # Safety
 * `basis` must be a live handle; `path` a NUL-terminated string.
 */
enum GsStatus gs_basis_save(const struct GsBasis *basis, const char *path);

/**
 * Number of eigenpairs, or 0 for NULL.
 *
 * # Safety
 * `basis` must be NULL or a live handle.
 */
size_t gs_basis_len(const struct GsBasis *basis);

/**
 * Vertex count, or 0 for NULL.
 *
 * # Safety
 * `basis` must be NULL or a live handle.
 */
size_t gs_basis_num_vertices(const struct GsBasis *basis);

/**
 * Copies the eigenvalues (ascending) into `out`.
 *
 * # Safety
 * `out` must have room for `capacity` doubles; `written` may be NULL.
 */
enum GsStatus gs_basis_eigenvalues(const struct GsBasis *basis,
                                   double *out,
                                   size_t capacity,
                                   size_t *written);

/**
 * # Safety
 * `basis` must be NULL or a handle not yet freed.
 */
void gs_basis_free(struct GsBasis *basis);

/**
 * Number of scattering paths for `config` (0 if it is invalid).
 */
uint64_t gs_path_count(struct GsScatterConfig config);

/**
 * Non-windowed coefficients `S̄ f(p) = ‖U[p] f‖₁`, one per path in
 * lexicographic path order.
 *
 * # Safety
 * `signal` must hold `num_vertices` doubles and `out` `capacity` doubles;
 * `written` may be NULL.
 */
enum GsStatus gs_scatter_nonwindowed(const struct GsBasis *basis,
                                     const double *signal,
                                     size_t num_vertices,
                                     const struct GsScatterConfig *config,
                                     double *out,
                                     size_t capacity,
                                     size_t *written);

/**
 * Windowed coefficients `S_J f`, one vertex function per path, written
 * path-major (`paths × n_v`).
 *
 * # Safety
 * `signal` must hold `num_vertices` doubles and `out` `capacity` doubles;
 * `written` may be NULL.
 */
enum GsStatus gs_scatter_windowed(const struct GsBasis *basis,
                                  const double *signal,
                                  size_t num_vertices,
                                  const struct GsScatterConfig *config,
                                  double *out,
                                  size_t capacity,
                                  size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOSCATTER_H */
