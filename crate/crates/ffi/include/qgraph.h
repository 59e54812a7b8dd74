#ifndef QGRAPH_H
#define QGRAPH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QgStatus {
  QG_STATUS_OK = 0,
  QG_STATUS_NULL_POINTER = 1,
  QG_STATUS_INVALID_ARGUMENT = 2,
  QG_STATUS_VALIDATION = 3,
  QG_STATUS_NUMERICAL = 4,
  QG_STATUS_IO = 5,
  QG_STATUS_BUFFER_TOO_SMALL = 6,
  QG_STATUS_PANIC = 7,
} QgStatus;

/**
 * A metric graph with its bond scattering matrix.
 */
typedef struct QgGraph QgGraph;

/**
 * Eigenvalues of a graph up to some `lambda_max`.
 */
typedef struct QgSpectrum QgSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qg_version(void);

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call into the library on this thread.
 */
const char *qg_last_error(void);

/**
 * Builds a graph with Kirchhoff conditions from `n_bonds` edges
 * `from[i] -> to[i]` of length `lengths[i]` on vertices `0..n_vertices`.
 *
 * # Safety
 * The three arrays must hold `n_bonds` elements; `out` must be writable.
 */
enum QgStatus qg_graph_new(size_t n_vertices,
                           const size_t *from,
                           const size_t *to,
                           const double *lengths,
                           size_t n_bonds,
                           struct QgGraph **out);

/**
 * Star graph with `n` bonds of the given lengths and Kirchhoff conditions.
 *
 * # Safety
 * `lengths` must hold `n` values; `out` must be writable.
 */
enum QgStatus qg_graph_star(const double *lengths, size_t n, struct QgGraph **out);

/**
 * Loads a TOML or JSON graph spec file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QgStatus qg_graph_from_spec(const char *path, struct QgGraph **out);

/**
 * # Safety
 * `g` must come from a `qg_graph_*` constructor and not be used afterwards.
 */
void qg_graph_free(struct QgGraph *g);

/**
 * # Safety
 * `g` must be a live graph handle; `out` must be writable.
 */
enum QgStatus qg_graph_bond_count(const struct QgGraph *g, size_t *out);

/**
 * Eigenphases of `U(lambda)` in `(0, 2π]`, decreasing. `len` must be at
 * least twice the bond count.
 *
 * # Safety
 * `g` must be a live graph handle; `out` must hold `len` doubles.
 */
enum QgStatus qg_graph_eigenphases(const struct QgGraph *g, double lambda, double *out, size_t len);

/**
 * `U(lambda)` as row-major real and imaginary parts, `(2B)²` entries each.
 *
 * # Safety
 * `g` must be a live graph handle; `re` and `im` must hold `len` doubles.
 */
enum QgStatus qg_graph_evolution_operator(const struct QgGraph *g,
                                          double lambda,
                                          double *re,
                                          double *im,
                                          size_t len);

/**
 * Eigenvalues in `(0, lambda_max]`; eigenvectors too when `with_vectors`.
 *
 * # Safety
 * `g` must be a live graph handle; `out` must be writable.
 */
enum QgStatus qg_spectrum_solve(const struct QgGraph *g,
                                double lambda_max,
                                bool with_vectors,
                                struct QgSpectrum **out);

/**
 * # Safety
 * `s` must come from [`qg_spectrum_solve`] and not be used afterwards.
 */
void qg_spectrum_free(struct QgSpectrum *s);

/**
 * Number of eigenvalues counted with multiplicity.
 *
 * # Safety
 * `s` must be a live spectrum handle; `out` must be writable.
 */
enum QgStatus qg_spectrum_len(const struct QgSpectrum *s, size_t *out);

/**
 * Eigenvalues, ascending, each repeated by its multiplicity.
 *
 * # Safety
 * `s` must be a live spectrum handle; `out` must hold `len` doubles.
 */
enum QgStatus qg_spectrum_eigenvalues(const struct QgSpectrum *s, double *out, size_t len);

/**
 * Number of distinct levels.
 *
 * # Safety
 * `s` must be a live spectrum handle; `out` must be writable.
 */
enum QgStatus qg_spectrum_level_count(const struct QgSpectrum *s, size_t *out);

/**
 * Distinct levels and their multiplicities.
 *
 * # Safety
 * `s` must be a live spectrum handle; both arrays must hold `len` entries.
 */
enum QgStatus qg_spectrum_levels(const struct QgSpectrum *s,
                                 double *lambdas,
                                 size_t *multiplicities,
                                 size_t len);

/**
 * `N(lambda_max) π / (𝓛 lambda_max)`. `g` must be the graph the spectrum
 * was solved for.
 *
 * # Safety
 * `g` and `s` must be live handles; `out` must be writable.
 */
enum QgStatus qg_spectrum_weyl_ratio(const struct QgGraph *g,
                                     const struct QgSpectrum *s,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QGRAPH_H */
