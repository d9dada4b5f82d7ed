/* Generated by cbindgen from crates/rieszflow-ffi/src/lib.rs. */

#ifndef RIESZFLOW_H
#define RIESZFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RfProfile {
  RF_PROFILE_INDICATOR = 0,
  RF_PROFILE_GAUSSIAN = 1,
  RF_PROFILE_BUMP = 2,
} RfProfile;

typedef enum RfRunStatus {
  RF_RUN_STATUS_COMPLETED = 0,
  RF_RUN_STATUS_REACHED_STEADY = 1,
  RF_RUN_STATUS_BLOWUP_SUSPECTED = 2,
  RF_RUN_STATUS_STEP_LIMIT = 3,
} RfRunStatus;

typedef enum RfStationarity {
  RF_STATIONARITY_MINIMIZER = 0,
  RF_STATIONARITY_SADDLE_WRT_DILATIONS = 1,
  RF_STATIONARITY_EXTREMAL = 2,
} RfStationarity;

typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_INVALID_ARGUMENT = 2,
  RF_STATUS_PARAMETER = 3,
  RF_STATUS_DOMAIN = 4,
  RF_STATUS_REGIME = 5,
  RF_STATUS_TRUNCATION = 6,
  RF_STATUS_GRID_MISMATCH = 7,
  RF_STATUS_BUILD = 8,
  RF_STATUS_CONFIG = 9,
  RF_STATUS_STABILITY = 10,
  RF_STATUS_NUMERICAL = 11,
  RF_STATUS_IO = 12,
  RF_STATUS_BUFFER_TOO_SMALL = 13,
  RF_STATUS_PANIC = 14,
} RfStatus;

typedef struct RfDensity RfDensity;

typedef struct RfGrid RfGrid;

typedef struct RfOperator RfOperator;

typedef struct RfParams RfParams;

typedef struct RfSteady RfSteady;

typedef struct RfSolverConfig {
  double tau;
  size_t max_iters;
  double fp_tol;
  double bisect_tol;
} RfSolverConfig;

typedef struct RfEvolveConfig {
  double cfl;
  double t_end;
  size_t record_every;
  double steady_tol;
  size_t max_steps;
  /**
   * Fixed time step; zero or negative selects the adaptive step.
   */
  double fixed_dt;
} RfEvolveConfig;

/**
 * Exponents derived from a parameter set.
 */
typedef struct RfExponents {
  double p_conj;
  double p_star;
  double m_c;
  double theta0;
} RfExponents;

/**
 * Energy terms of a density. Fields without a value are NaN.
 */
typedef struct RfEnergy {
  double norm_m_m;
  double interaction;
  double free_energy;
  double hls_quotient;
  double lambda_star;
  double lambda_value;
  double kappa;
} RfEnergy;

typedef struct RfSteadySummary {
  enum RfStationarity stationarity;
  bool converged;
  bool edge_supported;
  bool monotone;
  size_t iterations;
  double el_residual;
  double multiplier;
  double identity_defect;
  double support_radius;
  double mass;
  struct RfEnergy energy;
} RfSteadySummary;

typedef struct RfRunSummary {
  enum RfRunStatus status;
  bool converged;
  size_t steps;
  double t_final;
  double mass_drift;
  size_t energy_violations;
} RfRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *rf_last_error(void);

const char *rf_version(void);

struct RfSolverConfig rf_solver_config_default(void);

struct RfEvolveConfig rf_evolve_config_default(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum RfStatus rf_params_new(size_t n_dim,
                            double s,
                            double p,
                            double m,
                            double chi,
                            double mass,
                            struct RfParams **out);

/**
 * # Safety
 * `params` must come from `rf_params_new` and not be used afterwards.
 */
void rf_params_free(struct RfParams *params);

/**
 * # Safety
 * `params` must be a live handle and `out` valid for writes.
 */
enum RfStatus rf_params_exponents(const struct RfParams *params, struct RfExponents *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum RfStatus rf_grid_new(size_t n_dim, size_t n, double r_dom, struct RfGrid **out);

/**
 * # Safety
 * `grid` must come from `rf_grid_new` and not be used afterwards.
 */
void rf_grid_free(struct RfGrid *grid);

/**
 * Number of cells, or 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
size_t rf_grid_len(const struct RfGrid *grid);

/**
 * Builds K_a on `grid`, going through the on-disk cache when `cache_dir`
 * is not null.
 *
 * # Safety
 * `grid` must be a live handle, `cache_dir` null or a NUL-terminated
 * string, and `out` valid for writes.
 */
enum RfStatus rf_operator_build(const struct RfGrid *grid,
                                double a,
                                const char *cache_dir,
                                struct RfOperator **out);

/**
 * # Safety
 * `op` must come from `rf_operator_build` and not be used afterwards.
 */
void rf_operator_free(struct RfOperator *op);

/**
 * Copies `len` cell values into a new density on `grid`.
 *
 * # Safety
 * `grid` must be a live handle, `values` must point to `len` doubles and
 * `out` must be valid for writes.
 */
enum RfStatus rf_density_new(const struct RfGrid *grid,
                             const double *values,
                             size_t len,
                             struct RfDensity **out);

/**
 * Standard profile of the given length scale, normalized to `mass`.
 *
 * # Safety
 * `grid` must be a live handle and `out` valid for writes.
 */
enum RfStatus rf_density_profile(const struct RfGrid *grid,
                                 enum RfProfile kind,
                                 double scale,
                                 double mass,
                                 struct RfDensity **out);

/**
 * # Safety
 * `density` must come from this library and not be used afterwards.
 */
void rf_density_free(struct RfDensity *density);

/**
 * # Safety
 * `density` must be a live handle and `out` valid for writes.
 */
enum RfStatus rf_density_mass(const struct RfDensity *density, double *out);

/**
 * Copies the cell values into `buf`. `len_out` receives the cell count;
 * when `cap` is smaller nothing is copied and `RF_STATUS_BUFFER_TOO_SMALL`
 * is returned.
 *
 * # Safety
 * `density` must be a live handle, `buf` must hold `cap` doubles (or be
 * null with `cap` 0), and `len_out` must be valid for writes.
 */
enum RfStatus rf_density_values(const struct RfDensity *density,
                                double *buf,
                                size_t cap,
                                size_t *len_out);

/**
 * # Safety
 * All handles must be live and `out` valid for writes; `op` has order s/2.
 */
enum RfStatus rf_free_energy(const struct RfParams *params,
                             const struct RfOperator *op,
                             const struct RfDensity *density,
                             struct RfEnergy *out);

/**
 * Stationary state of mass M. `config` may be null for defaults.
 *
 * # Safety
 * Handles must be live, `config` null or valid, `out` valid for writes.
 */
enum RfStatus rf_steady_solve(const struct RfParams *params,
                              const struct RfOperator *op,
                              const struct RfSolverConfig *config,
                              struct RfSteady **out);

/**
 * Normalized HLS extremal with ‖h‖₁ = ‖h‖_m = 1.
 *
 * # Safety
 * Handles must be live, `config` null or valid, `out` valid for writes.
 */
enum RfStatus rf_hls_extremal(const struct RfParams *params,
                              const struct RfOperator *op,
                              const struct RfSolverConfig *config,
                              struct RfSteady **out);

/**
 * Critical mass and the sharp constant at m = m_c.
 *
 * # Safety
 * Handles must be live, `config` null or valid, outputs valid for writes.
 */
enum RfStatus rf_critical_mass(const struct RfParams *params,
                               const struct RfOperator *op,
                               const struct RfSolverConfig *config,
                               double *mc_out,
                               double *hstar_out);

/**
 * # Safety
 * `report` must come from this library and not be used afterwards.
 */
void rf_steady_free(struct RfSteady *report);

/**
 * # Safety
 * `report` must be a live handle and `out` valid for writes.
 */
enum RfStatus rf_steady_summary(const struct RfSteady *report, struct RfSteadySummary *out);

/**
 * The solved profile as a new density handle. Extremals may live on a
 * dilate of the operator's grid.
 *
 * # Safety
 * `report` must be a live handle and `out` valid for writes.
 */
enum RfStatus rf_steady_density(const struct RfSteady *report, struct RfDensity **out);

/**
 * Writes the JSON report, NUL-terminated, into `buf`. `len_out` receives
 * the length including the terminator.
 *
 * # Safety
 * `report` must be a live handle, `buf` must hold `cap` bytes (or be null
 * with `cap` 0), and `len_out` must be valid for writes.
 */
enum RfStatus rf_steady_json(const struct RfSteady *report, char *buf, size_t cap, size_t *len_out);

/**
 * Runs the gradient flow from `initial`. `config` may be null for
 * defaults and `reference` null when there is no target state. The final
 * density goes to `final_out` if it is not null.
 *
 * # Safety
 * Handles must be live, pointers null or valid as documented.
 */
enum RfStatus rf_evolve(const struct RfParams *params,
                        const struct RfOperator *op,
                        const struct RfDensity *initial,
                        const struct RfEvolveConfig *config,
                        const struct RfDensity *reference,
                        struct RfRunSummary *summary_out,
                        struct RfDensity **final_out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* RIESZFLOW_H */
