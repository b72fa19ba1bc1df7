#include "pel/pel.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "init.hpp"
#include "moments.hpp"
#include "pel_solver.hpp"
#include "ppel.hpp"
#include "rng.hpp"
#include "simlab.hpp"

using pel::ErrorKind;
using pel::Matrix;
using pel::Vector;

struct pel_table {
  pel::CsvTable table;
  std::vector<double> row_major;
};

struct pel_model {
  std::unique_ptr<pel::MomentModel> model;
  std::string family;
};

struct pel_fit {
  pel::PelFit fit;
  std::vector<pel::TuningEntry> table;
};

struct pel_report {
  pel::InferenceReport report;
};

struct pel_mc {
  pel::MonteCarloReport report;
};

struct pel_decomp {
  pel::Decomposition decomposition;
  std::size_t dim = 0;
};

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

thread_local std::string g_last_error;
thread_local double g_last_detail = kNaN;

pel_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return PEL_ERR_INVALID_ARGUMENT;
    case ErrorKind::Domain: return PEL_ERR_DOMAIN;
    case ErrorKind::InsufficientData: return PEL_ERR_INSUFFICIENT_DATA;
    case ErrorKind::Configuration: return PEL_ERR_CONFIGURATION;
    case ErrorKind::NumericalEvaluation: return PEL_ERR_NUMERICAL;
    case ErrorKind::UnboundedDual: return PEL_ERR_UNBOUNDED_DUAL;
    case ErrorKind::InfeasibleProjection: return PEL_ERR_INFEASIBLE_PROJECTION;
    case ErrorKind::SolverFailure: return PEL_ERR_SOLVER_FAILURE;
    case ErrorKind::Io: return PEL_ERR_IO;
    case ErrorKind::Data: return PEL_ERR_DATA;
  }
  return PEL_ERR_INTERNAL;
}

pel_status set_error(pel_status status, const std::string& message, double detail = kNaN) {
  g_last_error = message;
  g_last_detail = detail;
  return status;
}

// Runs body, translating exceptions into status codes.
template <class F>
pel_status guard(F&& body) {
  g_last_error.clear();
  g_last_detail = kNaN;
  try {
    body();
    return PEL_OK;
  } catch (const pel::UnstableSystemError& e) {
    return set_error(status_of(e.kind()), e.what(), e.spectral_radius());
  } catch (const pel::InfeasibleProjectionError& e) {
    return set_error(status_of(e.kind()), e.what(), e.min_feasible_varsigma());
  } catch (const pel::NumericalEvaluationError& e) {
    return set_error(status_of(e.kind()), e.what(), static_cast<double>(e.observation()));
  } catch (const pel::Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(PEL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(PEL_ERR_INTERNAL, e.what());
  }
}

void need(const void* ptr, const char* name) {
  if (ptr == nullptr) pel::fail(ErrorKind::InvalidArgument, std::string(name) + " is NULL");
}

Matrix row_major(const double* data, std::size_t rows, std::size_t cols) {
  need(data, "data");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * cols + j];
  return m;
}

void store_row_major(const Matrix& m, double* out) {
  need(out, "output");
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i * m.cols() + j] = m(i, j);
}

void store(const Vector& v, double* out) {
  need(out, "output");
  std::copy(v.data(), v.data() + v.size(), out);
}

Vector vector_of(const double* data, std::size_t size) {
  need(data, "vector");
  return Eigen::Map<const Vector>(data, static_cast<Eigen::Index>(size));
}

pel::PelOptions options_of(const pel_fit_options* opts) {
  pel::PelOptions o;
  if (opts != nullptr) {
    o.learning_rate = opts->learning_rate;
    o.beta1 = opts->beta1;
    o.beta2 = opts->beta2;
    o.adam_eps = opts->adam_eps;
    o.tol = opts->tol;
    o.max_outer = opts->max_outer;
    o.cap_prox_step = opts->cap_prox_step != 0;
  }
  o.keep_trace = false;
  return o;
}

double scad_a_of(const pel_fit_options* opts) { return opts != nullptr ? opts->scad_a : 3.7; }

pel::PenaltySpec scad(double pi, const pel_fit_options* opts) {
  pel::PenaltySpec spec = pel::PenaltySpec::scad(pi);
  spec.scad_a = scad_a_of(opts);
  return spec;
}

pel::KernelKind kernel_of(pel_kernel k) {
  switch (k) {
    case PEL_KERNEL_PARZEN: return pel::KernelKind::Parzen;
    case PEL_KERNEL_TUKEY_HANNING: return pel::KernelKind::TukeyHanning;
    case PEL_KERNEL_QS: return pel::KernelKind::QS;
  }
  pel::fail(ErrorKind::Configuration, "unknown kernel");
}

std::vector<double> levels_of(const double* levels, std::size_t count) {
  if (count == 0) return {0.90, 0.95, 0.99};
  need(levels, "levels");
  std::vector<double> out(levels, levels + count);
  for (double l : out)
    pel::require(l > 0.0 && l < 1.0, ErrorKind::Configuration, "levels must lie in (0, 1)");
  return out;
}

pel::TuningEntry entry_of(const pel::PelFit& fit) {
  pel::TuningEntry e;
  e.nu = fit.nu;
  e.pi = fit.pi;
  e.ok = true;
  e.bic = fit.bic;
  e.degenerate = fit.bic_degenerate;
  e.df_theta = fit.active_set.size();
  e.df_lambda = fit.dual.active_set.size();
  e.iterations = fit.iterations;
  e.converged = fit.converged;
  return e;
}

void check_theta(const pel_model* model, const double* theta) {
  need(model, "model");
  need(theta, "theta");
}

std::size_t params(const pel_model* model) { return model->model->p(); }

}  // namespace

extern "C" {

const char* pel_last_error(void) { return g_last_error.c_str(); }

double pel_last_error_detail(void) { return g_last_detail; }

const char* pel_status_name(pel_status status) {
  switch (status) {
    case PEL_OK: return "ok";
    case PEL_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case PEL_ERR_DOMAIN: return "domain";
    case PEL_ERR_INSUFFICIENT_DATA: return "insufficient_data";
    case PEL_ERR_CONFIGURATION: return "configuration";
    case PEL_ERR_NUMERICAL: return "numerical_evaluation";
    case PEL_ERR_UNBOUNDED_DUAL: return "unbounded_dual";
    case PEL_ERR_INFEASIBLE_PROJECTION: return "infeasible_projection";
    case PEL_ERR_SOLVER_FAILURE: return "solver_failure";
    case PEL_ERR_IO: return "io";
    case PEL_ERR_DATA: return "data";
    case PEL_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* pel_version(void) { return "1.0.0"; }

size_t pel_format_double(double value, char* buffer, size_t size) {
  const std::string text = pel::format_double(value);
  if (buffer != nullptr && size > 0) {
    const std::size_t n = std::min(size - 1, text.size());
    std::memcpy(buffer, text.data(), n);
    buffer[n] = '\0';
  }
  return text.size();
}

/* CSV */

pel_status pel_table_read(const char* path, pel_table** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto t = std::make_unique<pel_table>();
    t->table = pel::read_csv(path);
    const Matrix& m = t->table.data;
    t->row_major.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        t->row_major[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    *out = t.release();
  });
}

void pel_table_free(pel_table* table) { delete table; }

size_t pel_table_rows(const pel_table* table) {
  return table ? static_cast<size_t>(table->table.data.rows()) : 0;
}

size_t pel_table_cols(const pel_table* table) { return table ? table->table.header.size() : 0; }

const char* pel_table_column_name(const pel_table* table, size_t col) {
  if (table == nullptr || col >= table->table.header.size()) return nullptr;
  return table->table.header[col].c_str();
}

pel_status pel_table_find(const pel_table* table, const char* name, size_t* col) {
  return guard([&] {
    need(table, "table");
    need(name, "name");
    need(col, "col");
    *col = static_cast<size_t>(table->table.column(name));
  });
}

const double* pel_table_data(const pel_table* table) {
  return table ? table->row_major.data() : nullptr;
}

/* Models */

pel_status pel_model_var(const double* data, size_t n, size_t d, int lag, int demean,
                         pel_model** out) {
  return guard([&] {
    need(out, "out");
    auto m = std::make_unique<pel_model>();
    m->model = std::make_unique<pel::VarMoments>(row_major(data, n, d), lag, demean != 0);
    m->family = "var";
    *out = m.release();
  });
}

pel_status pel_model_lp(const double* target, const double* shock, const double* controls,
                        size_t n, size_t k, int horizons, int lags, pel_model** out) {
  return guard([&] {
    need(out, "out");
    const Matrix ctrl = k > 0 ? row_major(controls, n, k) : Matrix(static_cast<Eigen::Index>(n), 0);
    auto m = std::make_unique<pel_model>();
    m->model = std::make_unique<pel::LocalProjectionMoments>(vector_of(target, n), vector_of(shock, n),
                                                            ctrl, horizons, lags);
    m->family = "lp";
    *out = m.release();
  });
}

pel_status pel_model_mgarch(const double* data, size_t n, size_t d, int basis_dim,
                            pel_model** out) {
  return guard([&] {
    need(out, "out");
    auto m = std::make_unique<pel_model>();
    m->model = std::make_unique<pel::MgarchBekkMoments>(row_major(data, n, d), basis_dim);
    m->family = "mgarch";
    *out = m.release();
  });
}

void pel_model_free(pel_model* model) { delete model; }

pel_status pel_model_dims(const pel_model* model, size_t* n, size_t* r, size_t* p) {
  return guard([&] {
    need(model, "model");
    if (n) *n = model->model->n();
    if (r) *r = model->model->r();
    if (p) *p = model->model->p();
  });
}

const char* pel_model_family(const pel_model* model) {
  return model ? model->family.c_str() : "";
}

pel_status pel_model_ols(const pel_model* model, double* theta) {
  return guard([&] {
    need(model, "model");
    if (const auto* var = dynamic_cast<const pel::VarMoments*>(model->model.get()))
      store(pel::ols_var(*var), theta);
    else if (const auto* lp = dynamic_cast<const pel::LocalProjectionMoments*>(model->model.get()))
      store(pel::ols_lp(*lp), theta);
    else
      pel::fail(ErrorKind::Configuration, "least-squares start is available for var and lp only");
  });
}

pel_status pel_model_garch_init(const pel_model* model, uint64_t seed, double offdiag_sd,
                                double* theta) {
  return guard([&] {
    need(model, "model");
    const auto* mg = dynamic_cast<const pel::MgarchBekkMoments*>(model->model.get());
    pel::require(mg != nullptr, ErrorKind::Configuration,
                 "GARCH-based start is available for mgarch only");
    pel::CounterRng rng(seed);
    store(pel::mgarch_garch_init(*mg, rng, offdiag_sd), theta);
  });
}

pel_status pel_model_var_residual_cov(const pel_model* model, const double* theta,
                                      double* sigma) {
  return guard([&] {
    check_theta(model, theta);
    const auto* var = dynamic_cast<const pel::VarMoments*>(model->model.get());
    pel::require(var != nullptr, ErrorKind::Configuration, "residual covariance needs a var model");
    const Eigen::Index d = static_cast<Eigen::Index>(var->dim());
    const Eigen::Index cols = var->lagged().cols();
    const Eigen::Map<const Matrix> G(theta, d, cols);
    const Matrix E = var->responses() - var->lagged() * G.transpose();
    const Matrix S = E.transpose() * E / static_cast<double>(E.rows());
    store_row_major(S, sigma);
  });
}

/* Estimation */

void pel_fit_options_default(pel_fit_options* opts) {
  if (opts == nullptr) return;
  const pel::PelOptions o;
  opts->learning_rate = o.learning_rate;
  opts->beta1 = o.beta1;
  opts->beta2 = o.beta2;
  opts->adam_eps = o.adam_eps;
  opts->tol = o.tol;
  opts->max_outer = o.max_outer;
  opts->cap_prox_step = o.cap_prox_step ? 1 : 0;
  opts->scad_a = 3.7;
}

pel_status pel_default_grid(size_t n, size_t r, size_t count, double lo, double hi,
                            double* values) {
  return guard([&] {
    const pel::TuningGrid grid = pel::TuningGrid::log_spaced(n, r, count, lo, hi);
    need(values, "values");
    std::copy(grid.nu_values.begin(), grid.nu_values.end(), values);
  });
}

pel_status pel_fit_fixed(const pel_model* model, double nu, double pi, const double* theta0,
                         const pel_fit_options* opts, pel_fit** out) {
  return guard([&] {
    check_theta(model, theta0);
    need(out, "out");
    auto f = std::make_unique<pel_fit>();
    f->fit = pel::fit_pel(*model->model, scad(pi, opts), pel::PenaltySpec::lasso(nu),
                          vector_of(theta0, params(model)), options_of(opts));
    f->table.push_back(entry_of(f->fit));
    *out = f.release();
  });
}

pel_status pel_fit_tuned(const pel_model* model, const double* nu_values, size_t n_nu,
                         const double* pi_values, size_t n_pi, const double* theta0,
                         const pel_fit_options* opts, unsigned threads, pel_fit** out) {
  return guard([&] {
    check_theta(model, theta0);
    need(out, "out");
    need(nu_values, "nu_values");
    need(pi_values, "pi_values");
    pel::TuningGrid grid;
    grid.nu_values.assign(nu_values, nu_values + n_nu);
    grid.pi_values.assign(pi_values, pi_values + n_pi);
    pel::PelOptions o = options_of(opts);
    pel::validate(scad(1.0, opts));
    // select_tuning uses the default SCAD shape; refit the winner when a
    // custom shape is requested.
    pel::TuningResult res = pel::select_tuning(*model->model, grid, vector_of(theta0, params(model)),
                                               o, threads);
    auto f = std::make_unique<pel_fit>();
    if (scad_a_of(opts) != 3.7)
      res.fit = pel::fit_pel(*model->model, scad(res.pi, opts), pel::PenaltySpec::lasso(res.nu),
                             vector_of(theta0, params(model)), o);
    f->fit = std::move(res.fit);
    f->table = std::move(res.table);
    *out = f.release();
  });
}

pel_status pel_fit_at(const pel_model* model, double nu, double pi, const double* theta,
                      const pel_fit_options* opts, pel_fit** out) {
  return guard([&] {
    check_theta(model, theta);
    need(out, "out");
    pel::require(std::isfinite(nu) && nu >= 0.0 && std::isfinite(pi) && pi >= 0.0,
                 ErrorKind::Configuration, "nu and pi must be finite and >= 0");
    const pel::PelOptions o = options_of(opts);
    auto f = std::make_unique<pel_fit>();
    pel::PelFit& fit = f->fit;
    fit.theta = vector_of(theta, params(model));
    pel::require(fit.theta.allFinite(), ErrorKind::Data, "theta must be finite");
    fit.nu = nu;
    fit.pi = pi;
    fit.dual = pel::maximize_dual(model->model->eval_all(fit.theta), nu, o.dual);
    for (Eigen::Index k = 0; k < fit.theta.size(); ++k)
      if (fit.theta(k) != 0.0) fit.active_set.push_back(static_cast<std::size_t>(k));
    fit.objective = fit.dual.objective;
    if (pi > 0.0)
      for (Eigen::Index k = 0; k < fit.theta.size(); ++k)
        fit.objective += pel::penalty_value(scad(pi, opts), std::abs(fit.theta(k)));
    fit.converged = fit.dual.converged;
    const pel::BicScore bic = pel::bic_score(fit, *model->model);
    fit.bic = bic.value;
    fit.bic_degenerate = bic.degenerate;
    f->table.push_back(entry_of(fit));
    *out = f.release();
  });
}

void pel_fit_free(pel_fit* fit) { delete fit; }

pel_status pel_fit_get_summary(const pel_fit* fit, pel_fit_summary* out) {
  return guard([&] {
    need(fit, "fit");
    need(out, "out");
    const pel::PelFit& f = fit->fit;
    out->p = static_cast<size_t>(f.theta.size());
    out->r = static_cast<size_t>(f.dual.lambda.size());
    out->nu = f.nu;
    out->pi = f.pi;
    out->bic = f.bic;
    out->bic_degenerate = f.bic_degenerate ? 1 : 0;
    out->objective = f.objective;
    out->iterations = f.iterations;
    out->converged = f.converged ? 1 : 0;
    out->df_theta = f.active_set.size();
    out->df_lambda = f.dual.active_set.size();
    out->dual_converged = f.dual.converged ? 1 : 0;
    out->kkt_residual = f.dual.kkt_residual;
  });
}

pel_status pel_fit_theta(const pel_fit* fit, double* theta) {
  return guard([&] {
    need(fit, "fit");
    store(fit->fit.theta, theta);
  });
}

pel_status pel_fit_lambda(const pel_fit* fit, double* lambda) {
  return guard([&] {
    need(fit, "fit");
    store(fit->fit.dual.lambda, lambda);
  });
}

pel_status pel_fit_eta(const pel_fit* fit, double* eta) {
  return guard([&] {
    need(fit, "fit");
    store(fit->fit.dual.eta, eta);
  });
}

size_t pel_fit_tuning_count(const pel_fit* fit) { return fit ? fit->table.size() : 0; }

pel_status pel_fit_tuning_entry(const pel_fit* fit, size_t index, pel_tuning_entry* out) {
  return guard([&] {
    need(fit, "fit");
    need(out, "out");
    pel::require(index < fit->table.size(), ErrorKind::InvalidArgument, "tuning index out of range");
    const pel::TuningEntry& e = fit->table[index];
    out->nu = e.nu;
    out->pi = e.pi;
    out->ok = e.ok ? 1 : 0;
    out->bic = e.bic;
    out->degenerate = e.degenerate ? 1 : 0;
    out->df_theta = e.df_theta;
    out->df_lambda = e.df_lambda;
    out->iterations = e.iterations;
    out->converged = e.converged ? 1 : 0;
  });
}

const char* pel_fit_tuning_error(const pel_fit* fit, size_t index) {
  if (fit == nullptr || index >= fit->table.size()) return "";
  return fit->table[index].error.c_str();
}

/* Inference */

pel_status pel_kernel_parse(const char* name, pel_kernel* out) {
  return guard([&] {
    need(name, "name");
    need(out, "out");
    switch (pel::parse_kernel(name)) {
      case pel::KernelKind::Parzen: *out = PEL_KERNEL_PARZEN; break;
      case pel::KernelKind::TukeyHanning: *out = PEL_KERNEL_TUKEY_HANNING; break;
      case pel::KernelKind::QS: *out = PEL_KERNEL_QS; break;
    }
  });
}

void pel_inference_options_default(pel_inference_options* opts) {
  if (opts == nullptr) return;
  const pel::PpelOptions p;
  opts->varsigma = 0.0;
  opts->kernel = PEL_KERNEL_PARZEN;
  opts->bandwidth = 0.0;
  opts->levels = nullptr;
  opts->n_levels = 0;
  opts->box_factor = p.box_factor;
  opts->max_iterations = p.max_iterations;
  opts->threads = 1;
}

pel_status pel_infer(const pel_model* model, const pel_fit* fit, const size_t* targets, size_t m,
                     const pel_inference_options* opts, pel_report** out) {
  return guard([&] {
    need(model, "model");
    need(fit, "fit");
    need(out, "out");
    pel::require(m >= 1, ErrorKind::Configuration, "at least one target coordinate is required");
    need(targets, "targets");
    pel_inference_options defaults;
    pel_inference_options_default(&defaults);
    const pel_inference_options& o = opts ? *opts : defaults;
    pel::InferenceOptions io;
    io.targets.assign(targets, targets + m);
    io.varsigma = o.varsigma;
    io.kernel = kernel_of(o.kernel);
    io.bandwidth = o.bandwidth;
    io.levels = levels_of(o.levels, o.n_levels);
    io.ppel.box_factor = o.box_factor;
    io.ppel.max_iterations = o.max_iterations;
    io.threads = o.threads;
    auto r = std::make_unique<pel_report>();
    r->report = pel::run_inference(*model->model, fit->fit, io);
    *out = r.release();
  });
}

void pel_report_free(pel_report* report) { delete report; }

pel_status pel_report_get_summary(const pel_report* report, pel_report_summary* out) {
  return guard([&] {
    need(report, "report");
    need(out, "out");
    const pel::InferenceReport& r = report->report;
    out->m = r.coordinates.size();
    out->n_levels = r.levels.size();
    out->varsigma = r.varsigma;
    out->bandwidth = r.bandwidth;
    out->regularized = r.regularized ? 1 : 0;
    out->boundary_warning = r.boundary_warning ? 1 : 0;
  });
}

pel_status pel_report_row(const pel_report* report, size_t row, size_t* coordinate,
                          double* estimate, double* std_error, double* tstat, double* lower,
                          double* upper) {
  return guard([&] {
    need(report, "report");
    const pel::InferenceReport& r = report->report;
    pel::require(row < r.coordinates.size(), ErrorKind::InvalidArgument, "report row out of range");
    const Eigen::Index i = static_cast<Eigen::Index>(row);
    if (coordinate) *coordinate = r.coordinates[row];
    if (estimate) *estimate = r.theta_tilde(i);
    if (std_error) *std_error = r.std_errors(i);
    if (tstat) *tstat = r.tstats(i);
    for (std::size_t l = 0; l < r.levels.size(); ++l) {
      if (lower) lower[l] = r.lower(i, static_cast<Eigen::Index>(l));
      if (upper) upper[l] = r.upper(i, static_cast<Eigen::Index>(l));
    }
  });
}

const char* pel_report_warning(const pel_report* report) {
  return report ? report->report.warning.c_str() : "";
}

pel_status pel_report_write_csv(const pel_report* report, const char* path) {
  return guard([&] {
    need(report, "report");
    need(path, "path");
    std::ofstream out(path, std::ios::binary);
    if (!out) pel::fail(ErrorKind::Io, std::string("cannot write '") + path + "'");
    pel::write_report_csv(out, report->report);
    if (!out) pel::fail(ErrorKind::Io, std::string("failed writing '") + path + "'");
  });
}

/* Monte Carlo */

pel_status pel_family_parse(const char* name, pel_family* out) {
  return guard([&] {
    need(name, "name");
    need(out, "out");
    *out = static_cast<pel_family>(static_cast<int>(pel::parse_family(name)));
  });
}

pel_status pel_case_parse(const char* label, pel_case* out) {
  return guard([&] {
    need(label, "label");
    need(out, "out");
    *out = pel::parse_case(label) == pel::DesignCase::I ? PEL_CASE_I : PEL_CASE_II;
  });
}

void pel_sim_config_default(pel_sim_config* config) {
  if (config == nullptr) return;
  const pel::DgpConfig c;
  config->family = PEL_FAMILY_VAR1;
  config->n = c.n;
  config->dim = c.dim;
  config->design = PEL_CASE_I;
  config->seed = c.seed;
  config->burn_in = c.burn_in;
  config->lp_horizons = c.lp_horizons;
  config->lp_lags = c.lp_lags;
  config->basis_dim = c.basis_dim;
  config->shock_series = nullptr;
  config->shock_length = 0;
}

void pel_sim_estimator_default(pel_sim_estimator* est) {
  if (est == nullptr) return;
  const pel::EstimatorSpec s;
  est->nu = 0.0;
  est->pi = 0.0;
  est->grid_size = s.grid_size;
  est->grid_lo = s.grid_lo;
  est->pilot_tuning = s.pilot_tuning ? 1 : 0;
  est->inference = 1;
  est->target = -1;
  est->levels = nullptr;
  est->n_levels = 0;
  est->kernel = PEL_KERNEL_PARZEN;
  est->varsigma = 0.0;
  est->bandwidth = 0.0;
  pel_fit_options_default(&est->fit);
}

pel_status pel_simulate(const pel_sim_config* config, const pel_sim_estimator* est,
                        size_t replications, unsigned threads, pel_mc** out) {
  return guard([&] {
    need(config, "config");
    need(out, "out");
    pel::require(config->family == PEL_FAMILY_VAR1 || config->family == PEL_FAMILY_LP ||
                     config->family == PEL_FAMILY_MGARCH,
                 ErrorKind::Configuration, "unknown family");
    pel::require(config->design == PEL_CASE_I || config->design == PEL_CASE_II,
                 ErrorKind::Configuration, "unknown case");
    pel::DgpConfig c;
    c.family = static_cast<pel::Family>(static_cast<int>(config->family));
    c.n = config->n;
    c.dim = config->dim;
    c.design = config->design == PEL_CASE_I ? pel::DesignCase::I : pel::DesignCase::II;
    c.seed = config->seed;
    c.burn_in = config->burn_in;
    c.lp_horizons = config->lp_horizons;
    c.lp_lags = config->lp_lags;
    c.basis_dim = config->basis_dim;
    if (config->shock_series != nullptr) c.shock_series = vector_of(config->shock_series, config->shock_length);

    pel_sim_estimator defaults;
    pel_sim_estimator_default(&defaults);
    const pel_sim_estimator& e = est ? *est : defaults;
    pel::EstimatorSpec s;
    s.nu = e.nu;
    s.pi = e.pi;
    s.grid_size = e.grid_size;
    s.grid_lo = e.grid_lo;
    s.pilot_tuning = e.pilot_tuning != 0;
    s.pel = options_of(&e.fit);
    pel::require(e.fit.scad_a == 3.7, ErrorKind::Configuration,
                 "simulation uses the default SCAD shape (a = 3.7)");
    s.inference = e.inference != 0;
    if (e.target >= 0) s.target = static_cast<std::size_t>(e.target);
    s.levels = levels_of(e.levels, e.n_levels);
    s.kernel = kernel_of(e.kernel);
    s.varsigma = e.varsigma;
    s.bandwidth = e.bandwidth;
    auto mc = std::make_unique<pel_mc>();
    mc->report = pel::run_monte_carlo(c, s, replications, threads);
    *out = mc.release();
  });
}

void pel_mc_free(pel_mc* mc) { delete mc; }

pel_status pel_mc_get_summary(const pel_mc* mc, pel_mc_summary* out) {
  return guard([&] {
    need(mc, "mc");
    need(out, "out");
    const pel::MonteCarloReport& r = mc->report;
    out->replications = r.replications;
    out->failures = r.failures;
    out->p = static_cast<size_t>(r.theta0.size());
    out->target = r.target;
    out->target_truth = r.theta0(static_cast<Eigen::Index>(r.target));
    out->nu = r.nu;
    out->pi = r.pi;
    out->mse = r.pel.mse;
    out->bias_sq = r.pel.bias_sq;
    out->var = r.pel.var;
    out->has_ols = r.ols ? 1 : 0;
    out->ols_mse = r.ols ? r.ols->mse : kNaN;
    out->ols_bias_sq = r.ols ? r.ols->bias_sq : kNaN;
    out->ols_var = r.ols ? r.ols->var : kNaN;
    out->n_levels = r.levels.size();
    out->ci_count = r.ci.count;
  });
}

pel_status pel_mc_coverage(const pel_mc* mc, double* coverage, double* median_length) {
  return guard([&] {
    need(mc, "mc");
    const pel::CoverageSummary& c = mc->report.ci;
    for (std::size_t l = 0; l < c.coverage.size(); ++l) {
      if (coverage) coverage[l] = c.coverage[l];
      if (median_length) median_length[l] = c.median_length[l];
    }
  });
}

pel_status pel_mc_write_csv(const pel_mc* mc, const char* path) {
  return guard([&] {
    need(mc, "mc");
    need(path, "path");
    std::ofstream out(path, std::ios::binary);
    if (!out) pel::fail(ErrorKind::Io, std::string("cannot write '") + path + "'");
    pel::write_monte_carlo_csv(out, mc->report);
  });
}

pel_status pel_mc_write_log(const pel_mc* mc, const char* path) {
  return guard([&] {
    need(mc, "mc");
    need(path, "path");
    std::ofstream out(path, std::ios::binary);
    if (!out) pel::fail(ErrorKind::Io, std::string("cannot write '") + path + "'");
    pel::write_replication_log(out, mc->report);
  });
}

/* Connectedness */

pel_status pel_decompose(const double* G1, const double* sigma, size_t d, int horizons,
                         pel_decomp** out) {
  return guard([&] {
    need(out, "out");
    pel::require(d >= 1, ErrorKind::InvalidArgument, "dimension must be >= 1");
    auto dec = std::make_unique<pel_decomp>();
    dec->decomposition = pel::variance_decomposition(row_major(G1, d, d), row_major(sigma, d, d), horizons);
    dec->dim = d;
    *out = dec.release();
  });
}

void pel_decomp_free(pel_decomp* decomp) { delete decomp; }

size_t pel_decomp_dim(const pel_decomp* decomp) { return decomp ? decomp->dim : 0; }

size_t pel_decomp_horizons(const pel_decomp* decomp) {
  return decomp ? decomp->decomposition.dtilde.size() : 0;
}

pel_status pel_decomp_table(const pel_decomp* decomp, int h, double* out) {
  return guard([&] {
    need(decomp, "decomp");
    pel::require(h >= 1 && static_cast<std::size_t>(h) <= decomp->decomposition.dtilde.size(),
                 ErrorKind::InvalidArgument, "horizon out of range");
    store_row_major(decomp->decomposition.dtilde[static_cast<std::size_t>(h - 1)], out);
  });
}

pel_status pel_decomp_outdegree(const pel_decomp* decomp, double* out) {
  return guard([&] {
    need(decomp, "decomp");
    store_row_major(decomp->decomposition.outdegree, out);
  });
}

}  // extern "C"
