// Batch front-end over the C API: fit, infer, simulate, decompose.

#include <pel/pel.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSolver = 4;

struct CliError {
  int exit_code;
  std::string status;
  std::string message;
  double detail = std::nan("");
};

int exit_code_of(pel_status s) {
  switch (s) {
    case PEL_ERR_INVALID_ARGUMENT:
    case PEL_ERR_CONFIGURATION: return kExitConfig;
    case PEL_ERR_IO:
    case PEL_ERR_DATA:
    case PEL_ERR_INSUFFICIENT_DATA:
    case PEL_ERR_DOMAIN: return kExitData;
    default: return kExitSolver;
  }
}

void check(pel_status s) {
  if (s == PEL_OK) return;
  throw CliError{exit_code_of(s), pel_status_name(s), pel_last_error(), pel_last_error_detail()};
}

[[noreturn]] void config_error(const std::string& message) {
  throw CliError{kExitConfig, "configuration", message};
}

[[noreturn]] void io_error(const std::string& message) {
  throw CliError{kExitData, "io", message};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Table = std::unique_ptr<pel_table, Deleter<pel_table, pel_table_free>>;
using Model = std::unique_ptr<pel_model, Deleter<pel_model, pel_model_free>>;
using Fit = std::unique_ptr<pel_fit, Deleter<pel_fit, pel_fit_free>>;
using Report = std::unique_ptr<pel_report, Deleter<pel_report, pel_report_free>>;
using Mc = std::unique_ptr<pel_mc, Deleter<pel_mc, pel_mc_free>>;
using Decomp = std::unique_ptr<pel_decomp, Deleter<pel_decomp, pel_decomp_free>>;

std::string fmt(double v) {
  char buf[64];
  pel_format_double(v, buf, sizeof buf);
  return buf;
}

// ---- CSV helpers ---------------------------------------------------------

struct Frame {
  std::vector<std::string> names;
  std::size_t rows = 0;
  std::vector<double> values;  // row-major

  double at(std::size_t i, std::size_t j) const { return values[i * names.size() + j]; }

  std::size_t index(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return j;
    throw CliError{kExitData, "data", "column '" + name + "' not found"};
  }

  std::vector<double> column(const std::string& name) const {
    const std::size_t j = index(name);
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) out[i] = at(i, j);
    return out;
  }

  Frame select(const std::vector<std::string>& cols) const {
    if (cols.empty()) return *this;
    Frame out;
    out.names = cols;
    out.rows = rows;
    std::vector<std::size_t> idx;
    for (const auto& c : cols) idx.push_back(index(c));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j : idx) out.values.push_back(at(i, j));
    return out;
  }
};

Frame read_frame(const std::string& path) {
  pel_table* raw = nullptr;
  check(pel_table_read(path.c_str(), &raw));
  Table t(raw);
  Frame f;
  f.rows = pel_table_rows(t.get());
  const std::size_t cols = pel_table_cols(t.get());
  for (std::size_t j = 0; j < cols; ++j) f.names.emplace_back(pel_table_column_name(t.get(), j));
  const double* data = pel_table_data(t.get());
  f.values.assign(data, data + f.rows * cols);
  return f;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) io_error("cannot write '" + path.string() + "'");
    for (std::size_t j = 0; j < header.size(); ++j) out_ << (j ? "," : "") << header[j];
    out_ << '\n';
  }
  CsvWriter& operator<<(const std::string& s) {
    out_ << (first_ ? "" : ",") << s;
    first_ = false;
    return *this;
  }
  CsvWriter& operator<<(double v) { return *this << fmt(v); }
  CsvWriter& num(long long v) { return *this << std::to_string(v); }
  void end() {
    out_ << '\n';
    first_ = true;
  }
  ~CsvWriter() { out_.flush(); }

 private:
  fs::path path_;
  std::ofstream out_;
  bool first_ = true;
};

void write_matrix(const fs::path& path, const std::vector<std::string>& names, const double* m,
                  std::size_t rows) {
  CsvWriter w(path, names);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) w << m[i * names.size() + j];
    w.end();
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) io_error("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

void info(const std::string& message) { std::cerr << "info: " << message << '\n'; }

// ---- Shared option groups ------------------------------------------------

struct Common {
  std::string out = "out";
  unsigned threads = 0;
  std::uint64_t seed = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads (0 = all cores)")
      ->envname("PEL_THREADS")
      ->capture_default_str();
  app->add_option("--seed", c.seed, "Root seed")->capture_default_str();
}

struct ModelArgs {
  std::string data;
  std::string family = "var";
  std::vector<std::string> columns;
  int lag = 1;
  bool demean = false;
  std::string target;
  std::string shock;
  std::vector<std::string> controls;
  int horizons = 20;
  int lags = 4;
  int basis = 5;
};

void add_model(CLI::App* app, ModelArgs& m) {
  app->add_option("--data", m.data, "Input CSV (header row, numeric cells)")->required();
  app->add_option("--family", m.family, "var | lp | mgarch")
      ->check(CLI::IsMember({"var", "lp", "mgarch"}))
      ->capture_default_str();
  app->add_option("--columns", m.columns, "Series used by var/mgarch (default: all)")
      ->delimiter(',');
  app->add_option("--lag", m.lag, "VAR lag order")->capture_default_str();
  app->add_flag("--demean", m.demean, "Demean the VAR series");
  app->add_option("--target", m.target, "LP response column");
  app->add_option("--shock", m.shock, "LP shock column");
  app->add_option("--controls", m.controls, "LP control columns")->delimiter(',');
  app->add_option("--horizons", m.horizons, "LP horizons 0..H")->capture_default_str();
  app->add_option("--lags", m.lags, "LP control lags")->capture_default_str();
  app->add_option("--basis", m.basis, "MGARCH basis dimension K")->capture_default_str();
}

struct LoadedModel {
  Model model;
  std::vector<std::string> series;  // VAR/MGARCH column names
  std::size_t n = 0, r = 0, p = 0;
};

LoadedModel load_model(const ModelArgs& m) {
  const Frame all = read_frame(m.data);
  LoadedModel out;
  pel_model* raw = nullptr;
  if (m.family == "lp") {
    if (m.target.empty() || m.shock.empty()) config_error("lp needs --target and --shock");
    const std::vector<double> y = all.column(m.target);
    const std::vector<double> s = all.column(m.shock);
    const Frame c = m.controls.empty() ? Frame{{}, all.rows, {}} : all.select(m.controls);
    check(pel_model_lp(y.data(), s.data(), c.values.empty() ? nullptr : c.values.data(), all.rows,
                       c.names.size(), m.horizons, m.lags, &raw));
  } else {
    const Frame f = all.select(m.columns);
    out.series = f.names;
    if (m.family == "var")
      check(pel_model_var(f.values.data(), f.rows, f.names.size(), m.lag, m.demean ? 1 : 0, &raw));
    else
      check(pel_model_mgarch(f.values.data(), f.rows, f.names.size(), m.basis, &raw));
  }
  out.model.reset(raw);
  check(pel_model_dims(out.model.get(), &out.n, &out.r, &out.p));
  return out;
}

struct FitArgs {
  double nu = 0.0;
  double pi = 0.0;
  std::size_t grid_size = 8;
  double grid_lo = 0.01;
  double grid_hi = 1.0;
  std::string init;  // ols | garch | zero; default by family
  std::string theta0;
  double learning_rate = 0.0;
  double tol = 0.0;
  int max_outer = 0;
};

void add_fit(CLI::App* app, FitArgs& f) {
  app->add_option("--nu", f.nu, "Multiplier penalty (with --pi > 0: no grid search)");
  app->add_option("--pi", f.pi, "Parameter penalty");
  app->add_option("--grid-size", f.grid_size, "Grid points per penalty")->capture_default_str();
  app->add_option("--grid-lo", f.grid_lo, "Lower grid multiplier")->capture_default_str();
  app->add_option("--grid-hi", f.grid_hi, "Upper grid multiplier")->capture_default_str();
  app->add_option("--init", f.init, "Starting value: ols | garch | zero")
      ->check(CLI::IsMember({"ols", "garch", "zero"}));
  app->add_option("--theta0", f.theta0, "Starting value CSV (column 'value')");
  app->add_option("--learning-rate", f.learning_rate, "ADAM learning rate");
  app->add_option("--tol", f.tol, "Outer stopping tolerance");
  app->add_option("--max-outer", f.max_outer, "Outer iteration cap");
}

pel_fit_options fit_options(const FitArgs& f) {
  pel_fit_options o;
  pel_fit_options_default(&o);
  if (f.learning_rate > 0) o.learning_rate = f.learning_rate;
  if (f.tol > 0) o.tol = f.tol;
  if (f.max_outer > 0) o.max_outer = f.max_outer;
  return o;
}

std::vector<double> read_theta(const std::string& path, std::size_t p) {
  const Frame f = read_frame(path);
  std::vector<double> theta = f.column("value");
  if (theta.size() != p)
    throw CliError{kExitData, "data",
                   "'" + path + "' has " + std::to_string(theta.size()) + " rows, expected " +
                       std::to_string(p)};
  return theta;
}

std::vector<double> starting_value(const LoadedModel& lm, const ModelArgs& m, const FitArgs& f,
                                   std::uint64_t seed) {
  if (!f.theta0.empty()) return read_theta(f.theta0, lm.p);
  std::string init = f.init.empty() ? (m.family == "mgarch" ? "garch" : "ols") : f.init;
  std::vector<double> theta(lm.p, 0.0);
  if (init == "ols")
    check(pel_model_ols(lm.model.get(), theta.data()));
  else if (init == "garch")
    check(pel_model_garch_init(lm.model.get(), seed, 0.5, theta.data()));
  return theta;
}

Fit run_fit(const LoadedModel& lm, const ModelArgs& m, const FitArgs& f, const Common& c) {
  const std::vector<double> theta0 = starting_value(lm, m, f, c.seed);
  const pel_fit_options opts = fit_options(f);
  pel_fit* raw = nullptr;
  if (f.nu > 0 && f.pi > 0) {
    check(pel_fit_fixed(lm.model.get(), f.nu, f.pi, theta0.data(), &opts, &raw));
  } else {
    if (f.nu > 0 || f.pi > 0) config_error("--nu and --pi must be given together");
    std::vector<double> grid(f.grid_size);
    check(pel_default_grid(lm.n, lm.r, f.grid_size, f.grid_lo, f.grid_hi, grid.data()));
    check(pel_fit_tuned(lm.model.get(), grid.data(), grid.size(), grid.data(), grid.size(),
                        theta0.data(), &opts, c.threads, &raw));
  }
  return Fit(raw);
}

// ---- fit -----------------------------------------------------------------

struct FitCmd {
  Common common;
  ModelArgs model;
  FitArgs fit;
};

void write_fit(const fs::path& dir, const LoadedModel& lm, const ModelArgs& m, pel_fit* fit) {
  pel_fit_summary s;
  check(pel_fit_get_summary(fit, &s));
  std::vector<double> theta(s.p), lambda(s.r), eta(s.r);
  check(pel_fit_theta(fit, theta.data()));
  check(pel_fit_lambda(fit, lambda.data()));
  check(pel_fit_eta(fit, eta.data()));

  {
    CsvWriter w(dir / "theta_hat.csv", {"coordinate", "value", "active"});
    for (std::size_t k = 0; k < s.p; ++k) {
      w.num(static_cast<long long>(k)) << theta[k];
      w.num(theta[k] != 0.0 ? 1 : 0);
      w.end();
    }
  }
  {
    CsvWriter w(dir / "dual.csv", {"moment", "lambda", "eta", "active"});
    for (std::size_t j = 0; j < s.r; ++j) {
      w.num(static_cast<long long>(j)) << lambda[j] << eta[j];
      w.num(std::abs(lambda[j]) > 1e-8 ? 1 : 0);
      w.end();
    }
  }
  {
    CsvWriter w(dir / "tuning.csv", {"nu", "pi", "ok", "bic", "degenerate", "df_theta",
                                     "df_lambda", "iterations", "converged", "selected"});
    const std::size_t count = pel_fit_tuning_count(fit);
    for (std::size_t i = 0; i < count; ++i) {
      pel_tuning_entry e;
      check(pel_fit_tuning_entry(fit, i, &e));
      w << e.nu << e.pi;
      w.num(e.ok);
      w << (e.ok ? e.bic : std::nan(""));
      w.num(e.degenerate).num(static_cast<long long>(e.df_theta));
      w.num(static_cast<long long>(e.df_lambda)).num(e.iterations).num(e.converged);
      w.num(e.ok && e.nu == s.nu && e.pi == s.pi ? 1 : 0);
      w.end();
      if (!e.ok) info("grid point nu=" + fmt(e.nu) + " pi=" + fmt(e.pi) + " failed: " +
                      pel_fit_tuning_error(fit, i));
    }
  }
  if (m.family == "var") {
    const std::size_t d = lm.series.size();
    std::vector<double> sigma(d * d);
    check(pel_model_var_residual_cov(lm.model.get(), theta.data(), sigma.data()));
    write_matrix(dir / "sigma_hat.csv", lm.series, sigma.data(), d);
    if (m.lag == 1) {
      // theta = vec(G1), column-major; written row-major with series names.
      std::vector<double> g1(d * d);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) g1[i * d + j] = theta[j * d + i];
      write_matrix(dir / "g1_hat.csv", lm.series, g1.data(), d);
    }
  }
  json j;
  j["family"] = m.family;
  j["n"] = lm.n;
  j["r"] = lm.r;
  j["p"] = lm.p;
  j["nu"] = s.nu;
  j["pi"] = s.pi;
  j["bic"] = s.bic;
  j["bic_degenerate"] = s.bic_degenerate != 0;
  j["objective"] = s.objective;
  j["iterations"] = s.iterations;
  j["converged"] = s.converged != 0;
  j["df_theta"] = s.df_theta;
  j["df_lambda"] = s.df_lambda;
  j["dual_converged"] = s.dual_converged != 0;
  j["kkt_residual"] = s.kkt_residual;
  write_json(dir / "fit.json", j);
  if (!s.converged) info("outer iterations hit the cap before the tolerance was met");
}

int cmd_fit(const FitCmd& cmd) {
  const LoadedModel lm = load_model(cmd.model);
  const fs::path dir = prepare_out(cmd.common.out);
  Fit fit = run_fit(lm, cmd.model, cmd.fit, cmd.common);
  write_fit(dir, lm, cmd.model, fit.get());
  return 0;
}

// ---- infer ---------------------------------------------------------------

struct InferCmd {
  Common common;
  ModelArgs model;
  FitArgs fit;
  std::string fit_dir;
  std::vector<std::size_t> targets;
  std::vector<double> levels{0.90, 0.95, 0.99};
  std::string kernel = "parzen";
  double bandwidth = 0.0;
  double varsigma = 0.0;
  double box_factor = 10.0;
};

Fit load_fit(const LoadedModel& lm, const std::string& dir, const FitArgs& f) {
  const fs::path summary_path = fs::path(dir) / "fit.json";
  std::ifstream in(summary_path, std::ios::binary);
  if (!in) io_error("cannot read '" + summary_path.string() + "'");
  json summary;
  try {
    summary = json::parse(in);
  } catch (const json::exception& e) {
    throw CliError{kExitData, "data", "'" + summary_path.string() + "': " + e.what()};
  }
  if (!summary.contains("nu") || !summary.contains("pi"))
    throw CliError{kExitData, "data", "'" + summary_path.string() + "' lacks nu/pi"};
  const std::vector<double> theta = read_theta((fs::path(dir) / "theta_hat.csv").string(), lm.p);
  const pel_fit_options opts = fit_options(f);
  pel_fit* raw = nullptr;
  check(pel_fit_at(lm.model.get(), summary["nu"].get<double>(), summary["pi"].get<double>(),
                   theta.data(), &opts, &raw));
  return Fit(raw);
}

int cmd_infer(const InferCmd& cmd) {
  const LoadedModel lm = load_model(cmd.model);
  if (cmd.targets.empty()) config_error("--targets is required");
  for (std::size_t k : cmd.targets)
    if (k >= lm.p)
      config_error("target " + std::to_string(k) + " out of range (p = " + std::to_string(lm.p) +
                   ")");
  pel_kernel kernel;
  check(pel_kernel_parse(cmd.kernel.c_str(), &kernel));
  const fs::path dir = prepare_out(cmd.common.out);
  Fit fit = cmd.fit_dir.empty() ? run_fit(lm, cmd.model, cmd.fit, cmd.common)
                                : load_fit(lm, cmd.fit_dir, cmd.fit);

  pel_inference_options o;
  pel_inference_options_default(&o);
  o.kernel = kernel;
  o.varsigma = cmd.varsigma;
  o.bandwidth = cmd.bandwidth;
  o.levels = cmd.levels.data();
  o.n_levels = cmd.levels.size();
  o.box_factor = cmd.box_factor;
  o.threads = cmd.common.threads;
  pel_report* raw = nullptr;
  check(pel_infer(lm.model.get(), fit.get(), cmd.targets.data(), cmd.targets.size(), &o, &raw));
  Report report(raw);
  pel_report_summary s;
  check(pel_report_get_summary(report.get(), &s));
  info("varsigma = " + fmt(s.varsigma) +
       (cmd.varsigma > 0 ? " (user)" : " (default 0.2 n^(-1/3), n = " + std::to_string(lm.n) + ")"));
  info("bandwidth h_n = " + fmt(s.bandwidth) +
       (cmd.bandwidth > 0 ? " (user)" : " (default n^(1/5), n = " + std::to_string(lm.n) + ")"));
  if (s.regularized) info("Xi was regularized before taking its square root");
  if (*pel_report_warning(report.get())) info(pel_report_warning(report.get()));
  check(pel_report_write_csv(report.get(), (dir / "inference.csv").string().c_str()));
  return 0;
}

// ---- simulate ------------------------------------------------------------

struct SimulateCmd {
  Common common;
  std::string family;
  std::string design = "I";
  std::size_t n = 50;
  std::size_t dim = 10;
  std::size_t reps = 100;
  int burn_in = 200;
  int horizons = 20;
  int lags = 4;
  int basis = 5;
  std::string shock_file;
  std::string shock_column = "shock";
  double nu = 0.0;
  double pi = 0.0;
  std::size_t grid_size = 4;
  double grid_lo = 0.25;
  bool pilot = false;
  bool no_inference = false;
  long target = -1;
  std::vector<double> levels{0.90, 0.95, 0.99};
  std::string kernel = "parzen";
  double varsigma = 0.0;
  double bandwidth = 0.0;
  bool log = false;
};

int cmd_simulate(const SimulateCmd& cmd) {
  pel_sim_config c;
  pel_sim_config_default(&c);
  check(pel_family_parse(cmd.family.c_str(), &c.family));
  check(pel_case_parse(cmd.design.c_str(), &c.design));
  c.n = cmd.n;
  c.dim = cmd.dim;
  c.seed = cmd.common.seed;
  c.burn_in = cmd.burn_in;
  c.lp_horizons = cmd.horizons;
  c.lp_lags = cmd.lags;
  c.basis_dim = cmd.basis;
  std::vector<double> shock;
  if (!cmd.shock_file.empty()) {
    shock = read_frame(cmd.shock_file).column(cmd.shock_column);
    c.shock_series = shock.data();
    c.shock_length = shock.size();
  }
  pel_sim_estimator e;
  pel_sim_estimator_default(&e);
  e.nu = cmd.nu;
  e.pi = cmd.pi;
  e.grid_size = cmd.grid_size;
  e.grid_lo = cmd.grid_lo;
  e.pilot_tuning = cmd.pilot ? 1 : 0;
  e.inference = cmd.no_inference ? 0 : 1;
  e.target = cmd.target;
  e.levels = cmd.levels.data();
  e.n_levels = cmd.levels.size();
  check(pel_kernel_parse(cmd.kernel.c_str(), &e.kernel));
  e.varsigma = cmd.varsigma;
  e.bandwidth = cmd.bandwidth;
  if ((cmd.nu > 0) != (cmd.pi > 0)) config_error("--nu and --pi must be given together");

  const fs::path dir = prepare_out(cmd.common.out);
  pel_mc* raw = nullptr;
  check(pel_simulate(&c, &e, cmd.reps, cmd.common.threads, &raw));
  Mc mc(raw);
  check(pel_mc_write_csv(mc.get(), (dir / "simulation.csv").string().c_str()));
  if (cmd.log) check(pel_mc_write_log(mc.get(), (dir / "replications.jsonl").string().c_str()));

  pel_mc_summary s;
  check(pel_mc_get_summary(mc.get(), &s));
  std::ostringstream msg;
  msg << "replications " << s.replications << ", failures " << s.failures << ", PEL MSE "
      << fmt(s.mse);
  if (s.has_ols) msg << ", OLS MSE " << fmt(s.ols_mse);
  info(msg.str());
  return 0;
}

// ---- decompose -----------------------------------------------------------

struct DecomposeCmd {
  Common common;
  std::string g1;
  std::string sigma;
  int horizons = 10;
};

int cmd_decompose(const DecomposeCmd& cmd) {
  const Frame g1 = read_frame(cmd.g1);
  const Frame sigma = read_frame(cmd.sigma);
  const std::size_t d = g1.names.size();
  if (g1.rows != d)
    throw CliError{kExitData, "data", "'" + cmd.g1 + "' is not square"};
  if (sigma.rows != d || sigma.names.size() != d)
    throw CliError{kExitData, "data", "'" + cmd.sigma + "' does not match the G1 dimension"};
  const fs::path dir = prepare_out(cmd.common.out);
  pel_decomp* raw = nullptr;
  check(pel_decompose(g1.values.data(), sigma.values.data(), d, cmd.horizons, &raw));
  Decomp dec(raw);
  std::vector<double> table(d * d);
  for (int h = 1; h <= cmd.horizons; ++h) {
    check(pel_decomp_table(dec.get(), h, table.data()));
    write_matrix(dir / ("dtilde_h" + std::to_string(h) + ".csv"), g1.names, table.data(), d);
  }
  std::vector<double> out(static_cast<std::size_t>(cmd.horizons) * d);
  check(pel_decomp_outdegree(dec.get(), out.data()));
  std::vector<std::string> header{"horizon"};
  header.insert(header.end(), g1.names.begin(), g1.names.end());
  CsvWriter w(dir / "outdegree.csv", header);
  for (int h = 0; h < cmd.horizons; ++h) {
    w.num(h + 1);
    for (std::size_t j = 0; j < d; ++j) w << out[static_cast<std::size_t>(h) * d + j];
    w.end();
  }
  return 0;
}

// ---- error reporting -----------------------------------------------------

void report_error(const CliError& e) {
  json j;
  j["status"] = e.status;
  j["exit_code"] = e.exit_code;
  j["message"] = e.message;
  if (std::isfinite(e.detail)) {
    if (e.status == "infeasible_projection")
      j["min_feasible_varsigma"] = e.detail;
    else if (e.status == "numerical_evaluation")
      j["observation"] = static_cast<long long>(e.detail);
    else
      j["spectral_radius"] = e.detail;
  }
  std::cerr << json{{"error", j}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized empirical likelihood for dependent data"};
  app.set_version_flag("--version", std::string(pel_version()));
  app.set_config("--config", "", "TOML run configuration; unknown keys are rejected");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  FitCmd fit;
  CLI::App* fit_app = app.add_subcommand("fit", "Estimate theta with BIC-tuned or fixed penalties");
  add_common(fit_app, fit.common);
  add_model(fit_app, fit.model);
  add_fit(fit_app, fit.fit);

  InferCmd infer;
  CLI::App* infer_app = app.add_subcommand("infer", "Projected-EL confidence intervals");
  add_common(infer_app, infer.common);
  add_model(infer_app, infer.model);
  add_fit(infer_app, infer.fit);
  infer_app->add_option("--fit-dir", infer.fit_dir, "Reuse theta_hat.csv and fit.json from fit");
  infer_app->add_option("--targets", infer.targets, "0-based coordinates")->delimiter(',');
  infer_app->add_option("--levels", infer.levels, "Confidence levels in (0, 1)")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  infer_app->add_option("--kernel", infer.kernel, "parzen | tukey-hanning | qs")
      ->capture_default_str();
  infer_app->add_option("--bandwidth", infer.bandwidth, "HAC bandwidth (default n^(1/5))");
  infer_app->add_option("--varsigma", infer.varsigma, "Projection slack (default 0.2 n^(-1/3))");
  infer_app->add_option("--box-factor", infer.box_factor, "Local box radius in units of nu")
      ->capture_default_str();

  SimulateCmd sim;
  CLI::App* sim_app = app.add_subcommand("simulate", "Monte Carlo study");
  add_common(sim_app, sim.common);
  sim_app->add_option("family", sim.family, "var1 | lp | mgarch")->required();
  sim_app->add_option("--case", sim.design, "Design case I | II")->capture_default_str();
  sim_app->add_option("--n", sim.n, "Sample size")->capture_default_str();
  sim_app->add_option("--d", sim.dim, "Cross-section dimension")->capture_default_str();
  sim_app->add_option("--reps", sim.reps, "Replications")->capture_default_str();
  sim_app->add_option("--burn-in", sim.burn_in, "Burn-in draws")->capture_default_str();
  sim_app->add_option("--horizons", sim.horizons, "LP horizons")->capture_default_str();
  sim_app->add_option("--lags", sim.lags, "LP control lags")->capture_default_str();
  sim_app->add_option("--basis", sim.basis, "MGARCH basis dimension")->capture_default_str();
  sim_app->add_option("--shock-file", sim.shock_file, "CSV with an LP shock series");
  sim_app->add_option("--shock-column", sim.shock_column, "Column of --shock-file")
      ->capture_default_str();
  sim_app->add_option("--nu", sim.nu, "Fixed multiplier penalty");
  sim_app->add_option("--pi", sim.pi, "Fixed parameter penalty");
  sim_app->add_option("--grid-size", sim.grid_size, "BIC grid points per penalty")
      ->capture_default_str();
  sim_app->add_option("--grid-lo", sim.grid_lo, "Lower grid multiplier")->capture_default_str();
  sim_app->add_flag("--pilot", sim.pilot, "Tune once on a pilot sample");
  sim_app->add_flag("--no-inference", sim.no_inference, "Skip confidence intervals");
  sim_app->add_option("--target", sim.target, "CI coordinate (default: first nonzero)");
  sim_app->add_option("--levels", sim.levels, "Confidence levels")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  sim_app->add_option("--kernel", sim.kernel, "HAC kernel")->capture_default_str();
  sim_app->add_option("--varsigma", sim.varsigma, "Projection slack");
  sim_app->add_option("--bandwidth", sim.bandwidth, "HAC bandwidth");
  sim_app->add_flag("--log", sim.log, "Also write replications.jsonl");

  DecomposeCmd dec;
  CLI::App* dec_app = app.add_subcommand("decompose", "Generalized variance decomposition");
  add_common(dec_app, dec.common);
  dec_app->add_option("--g1", dec.g1, "d x d transition matrix CSV")->required();
  dec_app->add_option("--sigma", dec.sigma, "d x d innovation covariance CSV")->required();
  dec_app->add_option("--horizons", dec.horizons, "Horizons 1..H")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    // Missing config files are input errors; everything else is configuration.
    const bool missing_file = dynamic_cast<const CLI::FileError*>(&e) != nullptr;
    report_error(CliError{missing_file ? kExitData : kExitConfig,
                          missing_file ? "io" : "configuration", e.what()});
    return missing_file ? kExitData : kExitConfig;
  }

  try {
    if (fit_app->parsed()) return cmd_fit(fit);
    if (infer_app->parsed()) return cmd_infer(infer);
    if (sim_app->parsed()) return cmd_simulate(sim);
    if (dec_app->parsed()) return cmd_decompose(dec);
  } catch (const CliError& e) {
    report_error(e);
    return e.exit_code;
  } catch (const std::exception& e) {
    report_error(CliError{kExitSolver, "internal", e.what()});
    return kExitSolver;
  }
  return 0;
}
