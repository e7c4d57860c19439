#ifndef TONELLI_H
#define TONELLI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call; the numbering matches the command-line exit codes.
typedef enum TonelliStatus {
  TONELLI_STATUS_OK = 0,
  // Invalid configuration or arguments.
  TONELLI_STATUS_CONFIG = 2,
  // A computation failed (non-convergence, blow-up, leaving the domain).
  TONELLI_STATUS_NUMERICAL = 3,
  // A required pointer was NULL or a length did not match.
  TONELLI_STATUS_INVALID_ARGUMENT = 4,
  // An internal panic was caught at the boundary.
  TONELLI_STATUS_PANIC = 5,
} TonelliStatus;

// Opaque Tonelli Hamiltonian.
typedef struct TonelliSystemHandle TonelliSystemHandle;

// Opaque weak-KAM solution.
typedef struct TonelliWeakKamHandle TonelliWeakKamHandle;

// Discrete action parameters: time step, velocity truncation, nodes per axis.
typedef struct TonelliGridParams {
  double h;
  double vmax;
  size_t n;
} TonelliGridParams;

// Largest relative drifts of a rigid-body trajectory.
typedef struct TonelliConservation {
  double energy_drift;
  double casimir_drift;
  double spatial_momentum_drift;
  double orthogonality_defect;
} TonelliConservation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *tonelli_last_error_message(void);

// Catalog system `free` (dim 1 or 2), `pendulum` (dim 1) or `mech2d` (dim 2, coupling `eps`).
//
// # Safety
// `id` must be a NUL-terminated string and `out` a valid pointer.
enum TonelliStatus tonelli_system_new(const char *id,
                                      size_t dim,
                                      double eps,
                                      struct TonelliSystemHandle **out_system);

// System described by configuration text (`system = ...`, `dim`, `mass`, `terms`, ...).
//
// # Safety
// `config` must be a NUL-terminated string and `out` a valid pointer.
enum TonelliStatus tonelli_system_from_config(const char *config,
                                              struct TonelliSystemHandle **out_system);

// Releases a system; NULL is ignored.
//
// # Safety
// `system` must come from `tonelli_system_new`/`_from_config` and not be used afterwards.
void tonelli_system_free(struct TonelliSystemHandle *system);

// Torus dimension, or 0 for NULL.
//
// # Safety
// `system` must be NULL or a live handle.
size_t tonelli_system_dim(const struct TonelliSystemHandle *system);

// H(x, p); `x` and `p` have `dim` entries.
//
// # Safety
// Pointers must be valid for `dim` reads and one write.
enum TonelliStatus tonelli_energy(const struct TonelliSystemHandle *system,
                                  const double *x,
                                  const double *p,
                                  double *out_value);

// {f, g}(x, p) for catalog observable names (`H`, `p1`, `sin1`, `kinetic`, ...).
//
// # Safety
// Strings NUL-terminated; arrays valid for `dim` reads.
enum TonelliStatus tonelli_poisson_bracket(const struct TonelliSystemHandle *system,
                                           const char *f,
                                           const char *g,
                                           const double *x,
                                           const double *p,
                                           double *out_value);

// Flows (x, p) in place along the Hamiltonian vector field of observable `f` for time `t`.
//
// # Safety
// Strings NUL-terminated; `x` and `p` valid for `dim` reads and writes.
enum TonelliStatus tonelli_flow(const struct TonelliSystemHandle *system,
                                const char *f,
                                double *x,
                                double *p,
                                double t,
                                double dt);

// Solves the discrete weak-KAM problem in class `c` (`dim` entries).
//
// # Safety
// `c` valid for `dim` reads; `out` a valid pointer.
enum TonelliStatus tonelli_weak_kam_solve(const struct TonelliSystemHandle *system,
                                          const double *c,
                                          struct TonelliGridParams params,
                                          struct TonelliWeakKamHandle **out_result);

// Releases a solution; NULL is ignored.
//
// # Safety
// `result` must come from `tonelli_weak_kam_solve` and not be used afterwards.
void tonelli_weak_kam_free(struct TonelliWeakKamHandle *result);

// α(c), or NaN for NULL.
//
// # Safety
// `result` must be NULL or a live handle.
double tonelli_weak_kam_alpha(const struct TonelliWeakKamHandle *result);

// Whether value iteration met its tolerance; false for NULL.
//
// # Safety
// `result` must be NULL or a live handle.
bool tonelli_weak_kam_converged(const struct TonelliWeakKamHandle *result);

// Number of grid nodes (Nᵈ), or 0 for NULL.
//
// # Safety
// `result` must be NULL or a live handle.
size_t tonelli_weak_kam_node_count(const struct TonelliWeakKamHandle *result);

// Copies the critical subsolution u (row-major over nodes); `len` must equal the node count.
//
// # Safety
// `buf` valid for `len` writes.
enum TonelliStatus tonelli_weak_kam_values(const struct TonelliWeakKamHandle *result,
                                           double *buf,
                                           size_t len);

// Copies the Aubry indicator (zero on the estimated Aubry set); `len` must equal the node count.
//
// # Safety
// `buf` valid for `len` writes.
enum TonelliStatus tonelli_weak_kam_indicator(const struct TonelliWeakKamHandle *result,
                                              double *buf,
                                              size_t len);

// Number of nodes in the estimated projected Aubry set, or 0 for NULL.
//
// # Safety
// `result` must be NULL or a live handle.
size_t tonelli_weak_kam_aubry_count(const struct TonelliWeakKamHandle *result);

// Copies the Aubry node indices; `len` must equal the Aubry count.
//
// # Safety
// `buf` valid for `len` writes.
enum TonelliStatus tonelli_weak_kam_aubry_nodes(const struct TonelliWeakKamHandle *result,
                                                size_t *buf,
                                                size_t len);

// Copies the rotation vector; `len` must equal the dimension.
//
// # Safety
// `buf` valid for `len` writes.
enum TonelliStatus tonelli_weak_kam_rotation_vector(const struct TonelliWeakKamHandle *result,
                                                    double *buf,
                                                    size_t len);

// max over Aubry nodes of |H(x, c + du(x)) − α|.
//
// # Safety
// Handles live; `out_value` valid.
enum TonelliStatus tonelli_weak_kam_energy_defect(const struct TonelliSystemHandle *system,
                                                  const struct TonelliWeakKamHandle *result,
                                                  double *out_value);

// α at `count` classes stored consecutively in `classes` (`count·dim` entries).
//
// # Safety
// `classes` valid for `count·dim` reads, `out_alpha` for `count` writes.
enum TonelliStatus tonelli_alpha_table(const struct TonelliSystemHandle *system,
                                       const double *classes,
                                       size_t count,
                                       struct TonelliGridParams params,
                                       double *out_alpha);

// Weak-integrability verdict for the comma-separated `integrals` over `count` classes.
// `out_passed` receives the verdict; the status reports only errors.
//
// # Safety
// `integrals` NUL-terminated; `classes` valid for `count·dim` reads.
enum TonelliStatus tonelli_check(const struct TonelliSystemHandle *system,
                                 const char *integrals,
                                 const double *classes,
                                 size_t count,
                                 struct TonelliGridParams params,
                                 uint64_t seed,
                                 bool *out_passed);

// Integrates the free rigid body with principal moments `inertia` from body momentum
// `p0` and axis-angle attitude `attitude` (three entries each). Writes the conservation
// summary and, when `final_body_momentum` is not NULL, the final body momentum.
//
// # Safety
// Input arrays valid for 3 reads; outputs valid or NULL where allowed.
enum TonelliStatus tonelli_rigid_body(const double *inertia,
                                      const double *p0,
                                      const double *attitude,
                                      double t,
                                      double dt,
                                      struct TonelliConservation *out_summary,
                                      double *final_body_momentum);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TONELLI_H */
