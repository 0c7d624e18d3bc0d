#ifndef SHAPELAB_H
#define SHAPELAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The non-zero values below `NullPointer` match the exit
 * codes of the `shapelab` binary.
 */
typedef enum ShapelabStatus {
  SHAPELAB_STATUS_OK = 0,
  /**
   * Malformed JSON or an out-of-range parameter.
   */
  SHAPELAB_STATUS_CONFIG = 1,
  SHAPELAB_STATUS_SOLVER = 2,
  SHAPELAB_STATUS_MESH = 3,
  /**
   * The operation's precondition does not hold.
   */
  SHAPELAB_STATUS_PRECONDITION = 4,
  SHAPELAB_STATUS_INTERNAL = 5,
  SHAPELAB_STATUS_NULL_POINTER = 6,
  /**
   * A caller-supplied buffer is too small; the required length is
   * written to the length out-parameter.
   */
  SHAPELAB_STATUS_BUFFER_TOO_SMALL = 7,
  SHAPELAB_STATUS_PANIC = 8,
} ShapelabStatus;

/**
 * A triangulated domain. The domain description is kept when the mesh was
 * built from one, since boundary-parameterised fields need it.
 */
typedef struct ShapelabMesh ShapelabMesh;

/**
 * The μ₂ cluster of a mesh together with the lowest computed eigenpairs.
 */
typedef struct ShapelabSpectrum ShapelabSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call into the library on this thread.
 */
const char *shapelab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *shapelab_version(void);

/**
 * Meshes a domain given as JSON (the `domain` object of an experiment
 * config) with target size `h`.
 *
 * # Safety
 * `domain_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ShapelabStatus shapelab_mesh_build(const char *domain_json,
                                        double h,
                                        struct ShapelabMesh **out);

/**
 * Loads a mesh previously written by `shapelab mesh` (mesh.json).
 *
 * # Safety
 * `mesh_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ShapelabStatus shapelab_mesh_from_json(const char *mesh_json, struct ShapelabMesh **out);

/**
 * Writes the mesh as JSON into `buf` (NUL-terminated). `len` holds the
 * buffer size on entry and the required size, including the NUL, on exit.
 * Pass a null `buf` to query the size.
 *
 * # Safety
 * `mesh` must be a live handle, `len` a valid pointer and `buf` either null
 * or writable for `*len` bytes.
 */
enum ShapelabStatus shapelab_mesh_to_json(const struct ShapelabMesh *mesh, char *buf, size_t *len);

/**
 * Vertex, triangle and boundary-edge counts. Any out-pointer may be null.
 *
 * # Safety
 * `mesh` must be a live handle; non-null out-pointers must be valid.
 */
enum ShapelabStatus shapelab_mesh_counts(const struct ShapelabMesh *mesh,
                                         size_t *vertices,
                                         size_t *triangles,
                                         size_t *boundary_edges);

/**
 * Area (plane) or volume (cylinder) of the mesh.
 *
 * # Safety
 * `mesh` must be a live handle and `out` a valid pointer.
 */
enum ShapelabStatus shapelab_mesh_volume(const struct ShapelabMesh *mesh, double *out);

/**
 * # Safety
 * `mesh` must be null or a handle not yet freed.
 */
void shapelab_mesh_free(struct ShapelabMesh *mesh);

/**
 * Solves for μ₂ and its eigenspace. `solver_json` holds solver options
 * (the `solver` object of an experiment config) or is null for defaults.
 *
 * # Safety
 * `mesh` must be a live handle, `solver_json` null or NUL-terminated, and
 * `out` a valid pointer.
 */
enum ShapelabStatus shapelab_solve(const struct ShapelabMesh *mesh,
                                   const char *solver_json,
                                   struct ShapelabSpectrum **out);

/**
 * μ₂ and the detected multiplicity. Either out-pointer may be null.
 *
 * # Safety
 * `spectrum` must be a live handle; non-null out-pointers must be valid.
 */
enum ShapelabStatus shapelab_spectrum_mu2(const struct ShapelabSpectrum *spectrum,
                                          double *mu2,
                                          size_t *multiplicity);

/**
 * Copies basis vector `index` of the μ₂ eigenspace (M-normalised, one value
 * per mesh dof) into `buf`. `len` holds the capacity on entry and the dof
 * count on exit.
 *
 * # Safety
 * `spectrum` must be a live handle, `len` a valid pointer and `buf` either
 * null or writable for `*len` doubles.
 */
enum ShapelabStatus shapelab_spectrum_mode(const struct ShapelabSpectrum *spectrum,
                                           size_t index,
                                           double *buf,
                                           size_t *len);

/**
 * # Safety
 * `spectrum` must be null or a handle not yet freed.
 */
void shapelab_spectrum_free(struct ShapelabSpectrum *spectrum);

/**
 * Right derivative of μ₂ along a deformation field given as JSON (the
 * `field` object of an experiment config). Normal-speed fields need a mesh
 * built by [`shapelab_mesh_build`].
 *
 * # Safety
 * Handles must be live and belong together, `field_json` NUL-terminated and
 * `out` a valid pointer.
 */
enum ShapelabStatus shapelab_shape_derivative(const struct ShapelabMesh *mesh,
                                              const struct ShapelabSpectrum *spectrum,
                                              const char *field_json,
                                              double *out);

/**
 * μ₂ of the unit ball in ℝᵏ.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ShapelabStatus shapelab_mu2_ball(uint32_t k, double *out);

/**
 * μ₂ of the flat cylinder [−r, r] × S¹ of circumference `l`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ShapelabStatus shapelab_cylinder_mu2(double r, double l, double *out);

/**
 * Rayleigh-quotient bound of the comparison profile with parameter `r` on
 * the mesh, and whether the chain μ₂ ≤ bound ≤ μʳ holds within `tol`.
 *
 * # Safety
 * `mesh` must be a live handle; `bound` and `chain_ok` valid pointers.
 */
enum ShapelabStatus shapelab_weinberger_bound(const struct ShapelabMesh *mesh,
                                              double r,
                                              double mu2,
                                              double tol,
                                              double *bound,
                                              bool *chain_ok);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHAPELAB_H */
