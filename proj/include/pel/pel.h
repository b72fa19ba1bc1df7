#ifndef PEL_PEL_H
#define PEL_PEL_H

/* Penalized empirical likelihood for high-dimensional moment models on
 * dependent data. All matrices are dense, row-major, double precision.
 * Every fallible call returns a pel_status; on failure the calling thread's
 * last error (message and an optional numeric detail) is set. Handles are
 * opaque and owned by the caller, who releases them with the matching
 * *_free function (passing NULL is allowed). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define PEL_API __declspec(dllexport)
#else
#define PEL_API __attribute__((visibility("default")))
#endif

typedef enum pel_status {
  PEL_OK = 0,
  PEL_ERR_INVALID_ARGUMENT = 1,
  PEL_ERR_DOMAIN = 2,
  PEL_ERR_INSUFFICIENT_DATA = 3,
  PEL_ERR_CONFIGURATION = 4,
  PEL_ERR_NUMERICAL = 5,
  PEL_ERR_UNBOUNDED_DUAL = 6,
  PEL_ERR_INFEASIBLE_PROJECTION = 7,
  PEL_ERR_SOLVER_FAILURE = 8,
  PEL_ERR_IO = 9,
  PEL_ERR_DATA = 10,
  PEL_ERR_INTERNAL = 11
} pel_status;

/* Message of the last failed call on this thread ("" when none). */
PEL_API const char* pel_last_error(void);
/* Numeric detail of the last failure: spectral radius for an unstable
 * system, smallest feasible varsigma for an infeasible projection, the
 * observation index for a numerical evaluation failure; NaN otherwise. */
PEL_API double pel_last_error_detail(void);
/* Short snake_case name, e.g. "infeasible_projection". */
PEL_API const char* pel_status_name(pel_status status);
PEL_API const char* pel_version(void);
/* Shortest round-trip decimal text of value ("NA" for NaN). Returns the
 * length needed excluding the terminator; writes at most size bytes. */
PEL_API size_t pel_format_double(double value, char* buffer, size_t size);

/* ---- CSV input ---------------------------------------------------------- */

typedef struct pel_table pel_table;

/* Header row plus a rectangular block of finite numbers. */
PEL_API pel_status pel_table_read(const char* path, pel_table** out);
PEL_API void pel_table_free(pel_table* table);
PEL_API size_t pel_table_rows(const pel_table* table);
PEL_API size_t pel_table_cols(const pel_table* table);
PEL_API const char* pel_table_column_name(const pel_table* table, size_t col);
/* Index of the named column; PEL_ERR_DATA when absent. */
PEL_API pel_status pel_table_find(const pel_table* table, const char* name, size_t* col);
/* rows x cols values, row-major; valid while the table lives. */
PEL_API const double* pel_table_data(const pel_table* table);

/* ---- Moment models ------------------------------------------------------ */

typedef struct pel_model pel_model;

/* VAR(lag) on an n x d series. */
PEL_API pel_status pel_model_var(const double* data, size_t n, size_t d, int lag, int demean,
                                 pel_model** out);
/* Local projection of target on shock with k control series, horizons
 * 0..H and `lags` lags of the controls. */
PEL_API pel_status pel_model_lp(const double* target, const double* shock, const double* controls,
                                size_t n, size_t k, int horizons, int lags, pel_model** out);
/* BEKK(1,1) moments on an n x d series with a basis of the first K series. */
PEL_API pel_status pel_model_mgarch(const double* data, size_t n, size_t d, int basis_dim,
                                    pel_model** out);
PEL_API void pel_model_free(pel_model* model);
/* Effective sample size, number of moments, number of parameters. */
PEL_API pel_status pel_model_dims(const pel_model* model, size_t* n, size_t* r, size_t* p);
/* Family name: "var", "lp" or "mgarch". */
PEL_API const char* pel_model_family(const pel_model* model);
/* Least-squares starting value (VAR and LP only); p values. */
PEL_API pel_status pel_model_ols(const pel_model* model, double* theta);
/* GARCH(1,1)-based starting value (MGARCH only); p values. */
PEL_API pel_status pel_model_garch_init(const pel_model* model, uint64_t seed, double offdiag_sd,
                                        double* theta);
/* VAR residual covariance at theta (divisor n), d x d. */
PEL_API pel_status pel_model_var_residual_cov(const pel_model* model, const double* theta,
                                              double* sigma);

/* ---- PEL estimation ----------------------------------------------------- */

typedef struct pel_fit_options {
  double learning_rate;
  double beta1;
  double beta2;
  double adam_eps;
  double tol;
  int max_outer;
  int cap_prox_step;
  double scad_a;
} pel_fit_options;

PEL_API void pel_fit_options_default(pel_fit_options* opts);

/* count log-spaced values in [lo, hi] * sqrt(log r / n), ascending. */
PEL_API pel_status pel_default_grid(size_t n, size_t r, size_t count, double lo, double hi,
                                    double* values);

typedef struct pel_fit pel_fit;

/* Fixed (nu, pi). opts may be NULL for defaults. */
PEL_API pel_status pel_fit_fixed(const pel_model* model, double nu, double pi,
                                 const double* theta0, const pel_fit_options* opts, pel_fit** out);
/* BIC selection over the nu x pi grid; threads = 0 uses all cores. */
PEL_API pel_status pel_fit_tuned(const pel_model* model, const double* nu_values, size_t n_nu,
                                 const double* pi_values, size_t n_pi, const double* theta0,
                                 const pel_fit_options* opts, unsigned threads, pel_fit** out);
/* Wraps a given estimate: solves the dual at theta and scores BIC. */
PEL_API pel_status pel_fit_at(const pel_model* model, double nu, double pi, const double* theta,
                              const pel_fit_options* opts, pel_fit** out);
PEL_API void pel_fit_free(pel_fit* fit);

typedef struct pel_fit_summary {
  size_t p;
  size_t r;
  double nu;
  double pi;
  double bic;
  int bic_degenerate;
  double objective;
  int iterations;
  int converged;
  size_t df_theta;
  size_t df_lambda;
  int dual_converged;
  double kkt_residual;
} pel_fit_summary;

PEL_API pel_status pel_fit_get_summary(const pel_fit* fit, pel_fit_summary* out);
/* p values. */
PEL_API pel_status pel_fit_theta(const pel_fit* fit, double* theta);
/* r values each: multiplier and KKT vector at theta. */
PEL_API pel_status pel_fit_lambda(const pel_fit* fit, double* lambda);
PEL_API pel_status pel_fit_eta(const pel_fit* fit, double* eta);

typedef struct pel_tuning_entry {
  double nu;
  double pi;
  int ok;
  double bic;
  int degenerate;
  size_t df_theta;
  size_t df_lambda;
  int iterations;
  int converged;
} pel_tuning_entry;

/* Grid table in nu-major order; a fixed fit has one entry. */
PEL_API size_t pel_fit_tuning_count(const pel_fit* fit);
PEL_API pel_status pel_fit_tuning_entry(const pel_fit* fit, size_t index, pel_tuning_entry* out);
/* Failure message of an entry ("" when it succeeded). */
PEL_API const char* pel_fit_tuning_error(const pel_fit* fit, size_t index);

/* ---- PPEL inference ----------------------------------------------------- */

typedef enum pel_kernel { PEL_KERNEL_PARZEN = 0, PEL_KERNEL_TUKEY_HANNING = 1, PEL_KERNEL_QS = 2 } pel_kernel;

/* "parzen", "tukey-hanning", "qs". */
PEL_API pel_status pel_kernel_parse(const char* name, pel_kernel* out);

typedef struct pel_inference_options {
  double varsigma;  /* 0: 0.2 n^{-1/3} */
  pel_kernel kernel;
  double bandwidth; /* 0: n^{1/5} */
  const double* levels;
  size_t n_levels;  /* 0: 0.90, 0.95, 0.99 */
  double box_factor;
  int max_iterations;
  unsigned threads;
} pel_inference_options;

PEL_API void pel_inference_options_default(pel_inference_options* opts);

typedef struct pel_report pel_report;

PEL_API pel_status pel_infer(const pel_model* model, const pel_fit* fit, const size_t* targets,
                             size_t m, const pel_inference_options* opts, pel_report** out);
PEL_API void pel_report_free(pel_report* report);

typedef struct pel_report_summary {
  size_t m;
  size_t n_levels;
  double varsigma;
  double bandwidth;
  int regularized;
  int boundary_warning;
} pel_report_summary;

PEL_API pel_status pel_report_get_summary(const pel_report* report, pel_report_summary* out);
/* Per target row: coordinate, estimate, std error, t statistic, and the
 * interval bounds for each level (n_levels values each). */
PEL_API pel_status pel_report_row(const pel_report* report, size_t row, size_t* coordinate,
                                  double* estimate, double* std_error, double* tstat,
                                  double* lower, double* upper);
PEL_API const char* pel_report_warning(const pel_report* report);
PEL_API pel_status pel_report_write_csv(const pel_report* report, const char* path);

/* ---- Monte Carlo -------------------------------------------------------- */

typedef enum pel_family { PEL_FAMILY_VAR1 = 0, PEL_FAMILY_LP = 1, PEL_FAMILY_MGARCH = 2 } pel_family;
typedef enum pel_case { PEL_CASE_I = 0, PEL_CASE_II = 1 } pel_case;

/* "var1", "lp", "mgarch"; "I", "II". PEL_ERR_CONFIGURATION otherwise. */
PEL_API pel_status pel_family_parse(const char* name, pel_family* out);
PEL_API pel_status pel_case_parse(const char* label, pel_case* out);

typedef struct pel_sim_config {
  pel_family family;
  size_t n;
  size_t dim;
  pel_case design;
  uint64_t seed;
  int burn_in;
  int lp_horizons;
  int lp_lags;
  int basis_dim;
  const double* shock_series; /* NULL: surrogate */
  size_t shock_length;
} pel_sim_config;

PEL_API void pel_sim_config_default(pel_sim_config* config);

typedef struct pel_sim_estimator {
  double nu; /* nu > 0 and pi > 0: fixed pair, else BIC */
  double pi;
  size_t grid_size;
  double grid_lo;
  int pilot_tuning;
  int inference;
  long target; /* < 0: first nonzero coordinate of theta0 */
  const double* levels;
  size_t n_levels;
  pel_kernel kernel;
  double varsigma;
  double bandwidth;
  pel_fit_options fit;
} pel_sim_estimator;

PEL_API void pel_sim_estimator_default(pel_sim_estimator* est);

typedef struct pel_mc pel_mc;

PEL_API pel_status pel_simulate(const pel_sim_config* config, const pel_sim_estimator* est,
                                size_t replications, unsigned threads, pel_mc** out);
PEL_API void pel_mc_free(pel_mc* mc);

typedef struct pel_mc_summary {
  size_t replications;
  size_t failures;
  size_t p;
  size_t target;
  double target_truth;
  double nu; /* NaN when tuned per replication */
  double pi;
  double mse, bias_sq, var;
  int has_ols;
  double ols_mse, ols_bias_sq, ols_var;
  size_t n_levels;
  size_t ci_count;
} pel_mc_summary;

PEL_API pel_status pel_mc_get_summary(const pel_mc* mc, pel_mc_summary* out);
/* n_levels values each (NaN when no interval was produced). */
PEL_API pel_status pel_mc_coverage(const pel_mc* mc, double* coverage, double* median_length);
/* Table-shaped CSV and one-JSON-object-per-line replication log. */
PEL_API pel_status pel_mc_write_csv(const pel_mc* mc, const char* path);
PEL_API pel_status pel_mc_write_log(const pel_mc* mc, const char* path);

/* ---- Connectedness ------------------------------------------------------ */

typedef struct pel_decomp pel_decomp;

/* Generalized variance decomposition of a stable VAR(1), horizons 1..H. */
PEL_API pel_status pel_decompose(const double* G1, const double* sigma, size_t d, int horizons,
                                 pel_decomp** out);
PEL_API void pel_decomp_free(pel_decomp* decomp);
PEL_API size_t pel_decomp_dim(const pel_decomp* decomp);
PEL_API size_t pel_decomp_horizons(const pel_decomp* decomp);
/* Normalized d x d table at horizon h (1-based). */
PEL_API pel_status pel_decomp_table(const pel_decomp* decomp, int h, double* out);
/* H x d column sums. */
PEL_API pel_status pel_decomp_outdegree(const pel_decomp* decomp, double* out);

#ifdef __cplusplus
}
#endif

#endif /* PEL_PEL_H */
