#ifndef CGAS_H
#define CGAS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CgasStatus {
  CGAS_STATUS_OK = 0,
  CGAS_STATUS_NULL_POINTER = 1,
  CGAS_STATUS_INVALID_PARAMETER = 2,
  CGAS_STATUS_UNSUPPORTED_POTENTIAL = 3,
  CGAS_STATUS_NON_CONVERGENCE = 4,
  CGAS_STATUS_BOX_TOO_SMALL = 5,
  CGAS_STATUS_QUADRATURE = 6,
  /**
   * The caller's buffer is shorter than the data; nothing was written.
   */
  CGAS_STATUS_BUFFER_TOO_SMALL = 7,
  CGAS_STATUS_IO = 8,
  CGAS_STATUS_PANIC = 9,
  CGAS_STATUS_OTHER = 10,
} CgasStatus;

typedef enum CgasSolveMethod {
  /**
   * Closed form for radial fields, grid solver otherwise.
   */
  CGAS_SOLVE_METHOD_AUTO = 0,
  CGAS_SOLVE_METHOD_GRID = 1,
  CGAS_SOLVE_METHOD_RADIAL = 2,
} CgasSolveMethod;

/**
 * Retained samples of one chain.
 */
typedef struct CgasBatch CgasBatch;

/**
 * Exact `β = 1` ensemble of a radial potential.
 */
typedef struct CgasEnsemble CgasEnsemble;

/**
 * Equilibrium measure on a square grid.
 */
typedef struct CgasEquilibrium CgasEquilibrium;

/**
 * An external field `Q`.
 */
typedef struct CgasPotential CgasPotential;

/**
 * Scalar constants of an equilibrium solve. `droplet_radius` is NaN when
 * the droplet is not a centred disc.
 */
typedef struct CgasEquilibriumSummary {
  double frostman_const;
  double robin_const;
  double c0;
  double a0;
  double sigma_q;
  double droplet_radius;
  double total_mass;
} CgasEquilibriumSummary;

/**
 * Parameters of one Metropolis chain.
 */
typedef struct CgasChainParams {
  size_t n;
  double beta;
  size_t sweeps;
  size_t burn_in;
  size_t thin;
  uint64_t seed;
  uint32_t chain;
  double step_scale;
} CgasChainParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *cgas_last_error(void);

void cgas_clear_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cgas_version(void);

/**
 * `Q(ζ) = |ζ|²`.
 */
enum CgasStatus cgas_potential_ginibre(struct CgasPotential **out);

/**
 * `Q(ζ) = |ζ|^{2b}`.
 */
enum CgasStatus cgas_potential_power(double b, struct CgasPotential **out);

/**
 * `Q(ζ) = (|ζ|² − τ Re ζ²)/(1 − τ²)`, `0 ≤ τ < 1`.
 */
enum CgasStatus cgas_potential_elliptic(double tau, struct CgasPotential **out);

void cgas_potential_free(struct CgasPotential *p);

enum CgasStatus cgas_potential_value(const struct CgasPotential *p,
                                     double re,
                                     double im,
                                     double *out);

/**
 * Normalized Laplacian `∂∂̄Q` at `re + i·im`.
 */
enum CgasStatus cgas_potential_laplacian(const struct CgasPotential *p,
                                         double re,
                                         double im,
                                         double *out);

/**
 * `H_n` of `n` points given as separate real and imaginary arrays.
 */
enum CgasStatus cgas_hamiltonian(const struct CgasPotential *p,
                                 const double *re,
                                 const double *im,
                                 size_t n,
                                 double *out);

/**
 * Solve on `[−half_width, half_width]²` with `resolution²` cells; `method`
 * is one of the `CgasSolveMethod` values.
 */
enum CgasStatus cgas_equilibrium_solve(const struct CgasPotential *p,
                                       double half_width,
                                       size_t resolution,
                                       int32_t method,
                                       struct CgasEquilibrium **out);

void cgas_equilibrium_free(struct CgasEquilibrium *eq);

enum CgasStatus cgas_equilibrium_summary(const struct CgasEquilibrium *eq,
                                         struct CgasEquilibriumSummary *out);

/**
 * Distance from `re + i·im` to the droplet (0 inside).
 */
enum CgasStatus cgas_equilibrium_distance(const struct CgasEquilibrium *eq,
                                          double re,
                                          double im,
                                          double *out);

struct CgasChainParams cgas_chain_params_default(void);

enum CgasStatus cgas_run_chain(const struct CgasPotential *p,
                               const struct CgasEquilibrium *eq,
                               const struct CgasChainParams *params,
                               struct CgasBatch **out);

void cgas_batch_free(struct CgasBatch *b);

/**
 * Number of retained samples; 0 for NULL.
 */
size_t cgas_batch_len(const struct CgasBatch *b);

/**
 * Copy the per-sample droplet distances `D_n` into `buf[0..len)`.
 */
enum CgasStatus cgas_batch_d_n(const struct CgasBatch *b, double *buf, size_t cap);

/**
 * Copy the per-sample energies `H_n` into `buf[0..len)`.
 */
enum CgasStatus cgas_batch_energies(const struct CgasBatch *b, double *buf, size_t cap);

/**
 * Overall Metropolis acceptance rate after burn-in.
 */
enum CgasStatus cgas_batch_acceptance(const struct CgasBatch *b, double *out);

enum CgasStatus cgas_ensemble_new(const struct CgasPotential *p,
                                  size_t n,
                                  struct CgasEnsemble **out);

void cgas_ensemble_free(struct CgasEnsemble *e);

/**
 * Droplet radius `R` of the ensemble's potential.
 */
enum CgasStatus cgas_ensemble_radius(const struct CgasEnsemble *e, double *out);

/**
 * One-point function `R_n(r)`.
 */
enum CgasStatus cgas_ensemble_one_point(const struct CgasEnsemble *e, double r, double *out);

/**
 * `P(max |ζ_j| ≤ r)`.
 */
enum CgasStatus cgas_ensemble_radius_cdf(const struct CgasEnsemble *e, double r, double *out);

/**
 * Draw `draws` independent maximal moduli into `buf`.
 */
enum CgasStatus cgas_ensemble_max_radius_draws(const struct CgasEnsemble *e,
                                               size_t draws,
                                               uint64_t seed,
                                               double *buf,
                                               size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CGAS_H */
