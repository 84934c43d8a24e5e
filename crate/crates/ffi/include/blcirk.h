#ifndef BLCIRK_H
#define BLCIRK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum BlcirkStatus {
  BLCIRK_STATUS_OK = 0,
  BLCIRK_STATUS_INVALID_ARGUMENT = 1,
  BLCIRK_STATUS_NULL_POINTER = 2,
  BLCIRK_STATUS_BUFFER_TOO_SMALL = 3,
  BLCIRK_STATUS_IO = 4,
  BLCIRK_STATUS_PARSE = 5,
  BLCIRK_STATUS_CERTIFICATE = 6,
  BLCIRK_STATUS_NO_CONVERGENCE = 7,
  BLCIRK_STATUS_NUMERIC = 8,
  BLCIRK_STATUS_CALLBACK = 9,
  BLCIRK_STATUS_PANIC = 10,
} BlcirkStatus;

// Tableau construction routes.
typedef enum BlcirkMethod {
  BLCIRK_METHOD_COLLOCATION = 0,
  BLCIRK_METHOD_EXACT_PSWF = 1,
  BLCIRK_METHOD_APPROX_PSWF = 2,
  BLCIRK_METHOD_GAUSS_LEGENDRE = 3,
} BlcirkMethod;

// Opaque spherical-harmonic gravity model.
typedef struct BlcirkGravity BlcirkGravity;

// Opaque quadrature rule on [-1,1].
typedef struct BlcirkQuadrature BlcirkQuadrature;

// Opaque tableau (nodes, weights, integration matrix).
typedef struct BlcirkTableau BlcirkTableau;

// Right-hand side g(t, y) written to `out`; nonzero return aborts the run.
typedef int (*blcirk_rhs_fn)(double t, const double *y, double *out, size_t dim, void *user);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message (NUL-terminated, truncated to `len`) and
// returns the full message length in bytes excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t blcirk_last_error(char *buf, size_t len);

// Quadrature for exponentials of bandlimit `c` on [-1,1] to accuracy `eps`.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum BlcirkStatus blcirk_quadrature_build(double c, double eps, struct BlcirkQuadrature **out);

// Node count of a rule (0 for null).
//
// # Safety
// `q` must be null or a live handle.
size_t blcirk_quadrature_m(const struct BlcirkQuadrature *q);

// # Safety
// `q` must be a live handle; `nodes`/`weights` must hold `len` doubles.
enum BlcirkStatus blcirk_quadrature_copy(const struct BlcirkQuadrature *q,
                                         double *nodes,
                                         double *weights,
                                         size_t len);

// # Safety
// `q` must be null or a handle from [`blcirk_quadrature_build`], not yet freed.
void blcirk_quadrature_free(struct BlcirkQuadrature *q);

// Certified tableau on [0,1]. `m == 0` picks the smallest node count that
// reaches `eps`; Gauss–Legendre needs an explicit `m`.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum BlcirkStatus blcirk_tableau_build(double c,
                                       double eps,
                                       size_t m,
                                       enum BlcirkMethod method,
                                       struct BlcirkTableau **out);

// Reads a tableau JSON file (either interval; stored on [0,1]).
//
// # Safety
// `path` must be a NUL-terminated string; `out` a valid handle slot.
enum BlcirkStatus blcirk_tableau_load(const char *path, struct BlcirkTableau **out);

// Stage count (0 for null).
//
// # Safety
// `t` must be null or a live handle.
size_t blcirk_tableau_m(const struct BlcirkTableau *t);

// Copies nodes and weights (length M each) and S (M×M, row-major).
// Any output pointer may be null to skip it.
//
// # Safety
// `t` must be a live handle; non-null outputs must hold the stated lengths.
enum BlcirkStatus blcirk_tableau_copy(const struct BlcirkTableau *t,
                                      double *nodes,
                                      double *weights,
                                      double *s,
                                      size_t s_len);

// r(z) = 1 + z wᵀ(I − zS)⁻¹1 at z = re + i·im.
//
// # Safety
// `t` must be a live handle; `out_re`/`out_im` valid pointers.
enum BlcirkStatus blcirk_tableau_stability(const struct BlcirkTableau *t,
                                           double re,
                                           double im,
                                           double *out_re,
                                           double *out_im);

// # Safety
// `t` must be null or a handle from this library, not yet freed.
void blcirk_tableau_free(struct BlcirkTableau *t);

// Integrates y' = g(t, y) from t0 to t1 over `n_intervals` steps, iterating
// each interval until the sweep change is below `tol` (at most `max_sweeps`).
// Writes the final state to `y_out`.
//
// # Safety
// `t` must be a live handle; `y0` and `y_out` must hold `dim` doubles;
// `rhs` must be safe to call with `user`.
enum BlcirkStatus blcirk_propagate(const struct BlcirkTableau *t,
                                   blcirk_rhs_fn rhs,
                                   void *user,
                                   size_t dim,
                                   const double *y0,
                                   double t0,
                                   double t1,
                                   size_t n_intervals,
                                   double tol,
                                   size_t max_sweeps,
                                   double *y_out);

// Loads a coefficient file (header "mu R N_max", then "n m C S" lines).
//
// # Safety
// `path` must be a NUL-terminated string; `out` a valid handle slot.
enum BlcirkStatus blcirk_gravity_load(const char *path, struct BlcirkGravity **out);

// Maximum degree of a model (0 for null).
//
// # Safety
// `g` must be null or a live handle.
size_t blcirk_gravity_degree(const struct BlcirkGravity *g);

// Potential (km²/s²) at `r` (3 doubles, km) truncated at degree `n`.
//
// # Safety
// `g` must be a live handle; `r` must hold 3 doubles; `out` valid.
enum BlcirkStatus blcirk_gravity_potential(const struct BlcirkGravity *g,
                                           const double *r,
                                           size_t n,
                                           double *out);

// Acceleration (km/s²) at `r` truncated at degree `n`, written to `out[3]`.
//
// # Safety
// `g` must be a live handle; `r` and `out` must hold 3 doubles.
enum BlcirkStatus blcirk_gravity_acceleration(const struct BlcirkGravity *g,
                                              const double *r,
                                              size_t n,
                                              double *out);

// # Safety
// `g` must be null or a handle from this library, not yet freed.
void blcirk_gravity_free(struct BlcirkGravity *g);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLCIRK_H */
