#ifndef PROJFORGET_H
#define PROJFORGET_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_ARGUMENT = 2,
  PF_STATUS_DIMENSION_MISMATCH = 3,
  PF_STATUS_NEGATIVE_WEIGHT = 4,
  PF_STATUS_PARSE = 5,
  PF_STATUS_IO = 6,
  PF_STATUS_NUMERICAL = 7,
  PF_STATUS_BUFFER_TOO_SMALL = 8,
  PF_STATUS_PANIC = 9,
} PfStatus;

/**
 * Weighted undirected graph. Edges are stored in lexicographic `(u, v)`
 * order with `u < v`, which is also the order of solution vectors.
 */
typedef struct PfGraph PfGraph;

/**
 * Graph with a similarity and a dissimilarity weight per edge.
 */
typedef struct PfSignedGraph PfSignedGraph;

/**
 * Result of a solve or fit.
 */
typedef struct PfSolution PfSolution;

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *pf_last_error(void);

/**
 * Builds a graph from `m` edges `(us[i], vs[i])` with weights `w[i]`.
 *
 * # Safety
 * Array arguments must hold `m` elements; `out` must be writable.
 */
enum PfStatus pf_graph_new(size_t n,
                           size_t m,
                           const size_t *us,
                           const size_t *vs,
                           const double *w,
                           struct PfGraph **out);

/**
 * Reads a `u v w` edge list.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum PfStatus pf_graph_read(const char *path, struct PfGraph **out);

/**
 * # Safety
 * `g` must be a live handle or null.
 */
size_t pf_graph_edge_count(const struct PfGraph *g);

/**
 * # Safety
 * `g` must be a live handle or null.
 */
size_t pf_graph_node_count(const struct PfGraph *g);

/**
 * Copies the edge endpoints in storage order into `us` and `vs`, which
 * must have room for `len >= edge count` entries.
 *
 * # Safety
 * `g` must be a live handle; `us` and `vs` must be writable for `len` values.
 */
enum PfStatus pf_graph_edges(const struct PfGraph *g, size_t *us, size_t *vs, size_t len);

/**
 * # Safety
 * `g` must come from this library and not be used afterwards.
 */
void pf_graph_free(struct PfGraph *g);

/**
 * # Safety
 * Array arguments must hold `m` elements; `out` must be writable.
 */
enum PfStatus pf_signed_graph_new(size_t n,
                                  size_t m,
                                  const size_t *us,
                                  const size_t *vs,
                                  const double *wplus,
                                  const double *wminus,
                                  struct PfSignedGraph **out);

/**
 * Reads a `u v wplus wminus` edge list.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum PfStatus pf_signed_graph_read(const char *path, struct PfSignedGraph **out);

/**
 * # Safety
 * `g` must come from this library and not be used afterwards.
 */
void pf_signed_graph_free(struct PfSignedGraph *g);

/**
 * Euclidean metric nearness on `g`'s weights.
 *
 * # Safety
 * `g` must be a live handle; `out` must be writable.
 */
enum PfStatus pf_nearness_solve(const struct PfGraph *g,
                                double threshold,
                                size_t max_iterations,
                                struct PfSolution **out);

/**
 * Correlation-clustering relaxation; `dense != 0` selects the complete-graph
 * schedule.
 *
 * # Safety
 * `g` must be a live handle; `out` must be writable.
 */
enum PfStatus pf_cc_solve(const struct PfSignedGraph *g,
                          double gamma,
                          double tol,
                          size_t max_iterations,
                          int dense,
                          struct PfSolution **out);

/**
 * Linear L2 SVM. `x` is row-major `n x d`, `y` holds +1/-1. The solution
 * vector is `w`.
 *
 * # Safety
 * `x` must hold `n * d` values, `y` `n` values; `out` must be writable.
 */
enum PfStatus pf_svm_fit(const double *x,
                         const double *y,
                         size_t n,
                         size_t d,
                         double c_penalty,
                         size_t epochs,
                         uint64_t seed,
                         struct PfSolution **out);

/**
 * ITML. `x` is row-major `n x d`; pair arrays hold `(i, j)` index pairs
 * flattened, `2 * ns` and `2 * nd` entries. The solution vector is the
 * learned `d x d` matrix, row-major.
 *
 * # Safety
 * Array arguments must hold the stated number of values; `out` must be writable.
 */
enum PfStatus pf_itml_fit(const double *x,
                          size_t n,
                          size_t d,
                          const size_t *similar,
                          size_t ns,
                          const size_t *dissimilar,
                          size_t nd,
                          double gamma,
                          double u,
                          double l,
                          size_t budget,
                          uint64_t seed,
                          struct PfSolution **out);

/**
 * # Safety
 * `s` must be a live handle or null.
 */
size_t pf_solution_len(const struct PfSolution *s);

/**
 * Copies the solution vector into `buf`, which must hold `len >= pf_solution_len` values.
 *
 * # Safety
 * `s` must be a live handle; `buf` must be writable for `len` values.
 */
enum PfStatus pf_solution_values(const struct PfSolution *s, double *buf, size_t len);

/**
 * 1 if the run met its convergence criterion, 0 otherwise or for null.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
int pf_solution_converged(const struct PfSolution *s);

/**
 * # Safety
 * `s` must be a live handle or null.
 */
size_t pf_solution_iterations(const struct PfSolution *s);

/**
 * Clustering objective; NaN for other problems.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
double pf_solution_objective(const struct PfSolution *s);

/**
 * Clustering approximation ratio; NaN for other problems.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
double pf_solution_ratio(const struct PfSolution *s);

/**
 * Writes the iteration trace as CSV; `timing == 0` zeroes the time column.
 *
 * # Safety
 * `s` must be a live handle; `path` a nul-terminated string.
 */
enum PfStatus pf_solution_write_trace(const struct PfSolution *s, const char *path, int timing);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void pf_solution_free(struct PfSolution *s);

#endif  /* PROJFORGET_H */
