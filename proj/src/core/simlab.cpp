#include "simlab.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "csv.hpp"
#include "init.hpp"
#include "parallel.hpp"

namespace pel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kPilotStream = std::numeric_limits<std::uint64_t>::max();

Vector standard_normal(Eigen::Index d, CounterRng& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Vector e(d);
  for (Eigen::Index i = 0; i < d; ++i) e(i) = N(rng);
  return e;
}

Matrix cholesky_factor(const Matrix& S) {
  Eigen::LLT<Matrix> llt(S);
  require(llt.info() == Eigen::Success, ErrorKind::Configuration,
          "error covariance is not positive definite");
  return llt.matrixL();
}

double snr_ratio(const Matrix& G, const Matrix& Sigma, double c) {
  const Matrix Gamma = stationary_covariance(c * G, Sigma);
  return (Gamma.trace() - Sigma.trace()) / Sigma.trace();
}

Vector pack_bekk(const MgarchDesign& design) {
  const std::size_t d = static_cast<std::size_t>(design.C.rows());
  const Eigen::Index dd = static_cast<Eigen::Index>(d * d);
  const std::size_t vd = d * (d + 1) / 2;
  Vector theta(static_cast<Eigen::Index>(vd) + 2 * dd);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = j; i < d; ++i)
      theta(static_cast<Eigen::Index>(vech_index(i, j, d))) =
          design.C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  theta.segment(static_cast<Eigen::Index>(vd), dd) = Eigen::Map<const Vector>(design.D.data(), dd);
  theta.segment(static_cast<Eigen::Index>(vd) + dd, dd) = Eigen::Map<const Vector>(design.B.data(), dd);
  return theta;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

Family parse_family(const std::string& name) {
  if (name == "var1") return Family::Var1;
  if (name == "lp") return Family::Lp;
  if (name == "mgarch") return Family::Mgarch;
  fail(ErrorKind::Configuration, "unknown family '" + name + "' (var1, lp, mgarch)");
}

std::string family_name(Family family) {
  switch (family) {
    case Family::Var1: return "var1";
    case Family::Lp: return "lp";
    case Family::Mgarch: return "mgarch";
  }
  return "var1";
}

DesignCase parse_case(const std::string& label) {
  if (label == "I") return DesignCase::I;
  if (label == "II") return DesignCase::II;
  fail(ErrorKind::Configuration, "invalid case label '" + label + "' (I or II)");
}

std::string case_name(DesignCase c) { return c == DesignCase::I ? "I" : "II"; }

void DgpConfig::validate() const {
  require(n >= 10, ErrorKind::Configuration, "n must be at least 10");
  require(dim >= 1, ErrorKind::Configuration, "dim must be at least 1");
  require(burn_in >= 0, ErrorKind::Configuration, "burn_in must be >= 0");
  require(sparsity > 0.0 && sparsity <= 1.0, ErrorKind::Configuration,
          "sparsity must lie in (0, 1]");
  require(signal_to_noise > 0.0, ErrorKind::Configuration, "signal_to_noise must be > 0");
  require(lp_horizons >= 0 && lp_lags >= 0, ErrorKind::Configuration,
          "lp horizons and lags must be >= 0");
  require(mgarch_offdiag_density >= 0.0 && mgarch_offdiag_density <= 1.0,
          ErrorKind::Configuration, "mgarch off-diagonal density must lie in [0, 1]");
  if (family == Family::Mgarch)
    require(basis_dim >= 1 && static_cast<std::size_t>(basis_dim) <= dim,
            ErrorKind::Configuration, "basis_dim must lie in [1, dim]");
  if (family == Family::Lp && shock_series)
    require(static_cast<std::size_t>(shock_series->size()) >= n, ErrorKind::Configuration,
            "shock series is shorter than n");
}

double spectral_radius(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix var_error_covariance(std::size_t d, DesignCase design) {
  const Eigen::Index n = static_cast<Eigen::Index>(d);
  if (design == DesignCase::I) return Matrix::Identity(n, n);
  Matrix S(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) S(i, j) = std::pow(0.2, std::abs(static_cast<double>(i - j)));
  return S;
}

Matrix stationary_covariance(const Matrix& A, const Matrix& S) {
  const double rho = spectral_radius(A);
  if (!(rho < 1.0)) {
    std::ostringstream msg;
    msg << "transition matrix is not stable (spectral radius " << rho << ")";
    throw UnstableSystemError(rho, msg.str());
  }
  // Doubling: Gamma_{k+1} = Gamma_k + A_k Gamma_k A_k^T, A_{k+1} = A_k^2.
  Matrix Gamma = S;
  Matrix Ak = A;
  for (int it = 0; it < 200; ++it) {
    Gamma += Ak * Gamma * Ak.transpose();
    Ak = Ak * Ak;
    if (Ak.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  return 0.5 * (Gamma + Gamma.transpose());
}

VarDesign draw_var_design(const DgpConfig& config, CounterRng& rng) {
  const std::size_t d = config.dim;
  const std::size_t cells = d * d;
  const std::size_t nonzero =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.sparsity * cells)));
  VarDesign out;
  out.Sigma = var_error_covariance(d, config.design);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int attempt = 0; attempt < config.max_redraws; ++attempt) {
    std::vector<std::size_t> positions(cells);
    std::iota(positions.begin(), positions.end(), 0);
    // partial Fisher-Yates
    for (std::size_t k = 0; k < nonzero; ++k) {
      std::uniform_int_distribution<std::size_t> U(k, cells - 1);
      std::swap(positions[k], positions[U(rng)]);
    }
    Matrix G = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < nonzero; ++k)
      G(static_cast<Eigen::Index>(positions[k] % d), static_cast<Eigen::Index>(positions[k] / d)) = N(rng);
    if (G.cwiseAbs().maxCoeff() == 0.0) continue;

    const double rho = spectral_radius(G);
    double lo = 0.0, hi;
    if (rho > 1e-12) {
      hi = 1.0 / rho;
    } else {
      hi = 1.0;
      int grow = 0;
      while (snr_ratio(G, out.Sigma, hi) < config.signal_to_noise && grow++ < 60) hi *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (snr_ratio(G, out.Sigma, mid) < config.signal_to_noise) lo = mid; else hi = mid;
    }
    const Matrix scaled = lo * G;
    if (spectral_radius(scaled) < 1.0 &&
        std::abs(snr_ratio(G, out.Sigma, lo) - config.signal_to_noise) < 1e-6 * config.signal_to_noise) {
      out.G1 = scaled;
      return out;
    }
  }
  fail(ErrorKind::SolverFailure, "could not draw a stable VAR coefficient matrix");
}

VarSample simulate_var1(const VarDesign& design, std::size_t n, int burn_in, CounterRng& rng) {
  const Eigen::Index d = design.G1.rows();
  const Matrix L = cholesky_factor(design.Sigma);
  VarSample out;
  out.data.resize(static_cast<Eigen::Index>(n), d);
  Vector z = Vector::Zero(d);
  for (long t = -burn_in; t < static_cast<long>(n); ++t) {
    z = design.G1 * z + L * standard_normal(d, rng);
    if (t >= 0) out.data.row(t) = z.transpose();
  }
  out.theta0 = Eigen::Map<const Vector>(design.G1.data(), design.G1.size());
  return out;
}

VarSample gen_var1(const DgpConfig& config, CounterRng& rng) {
  config.validate();
  CounterRng design_rng = rng.split(0);
  CounterRng path_rng = rng.split(1);
  return simulate_var1(draw_var_design(config, design_rng), config.n, config.burn_in, path_rng);
}

Vector shock_surrogate(std::size_t n, CounterRng& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  const double unit = 1.0 / std::sqrt(0.9 + 0.1 * 9.0);
  Vector s(static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n; ++t) {
    const double base = t < 300 ? 0.077 : 0.012;
    const double scale = U(rng) < 0.1 ? 3.0 : 1.0;
    s(static_cast<Eigen::Index>(t)) = base * unit * scale * N(rng);
  }
  return s;
}

LpDesign lp_design() {
  LpDesign d;
  d.G1.resize(2, 2);
  d.G1 << 0.5, 0.2, 0.0, 0.5;
  d.b0.resize(2);
  d.b0 << 0.5, 0.5;
  d.Sigma.resize(2, 2);
  d.Sigma << 1.0, 0.5, 0.5, 1.0;
  return d;
}

Vector lp_true_theta(const LpDesign& design, int horizons, int lags) {
  const Eigen::Index k = 2 + 3 * lags;
  Vector theta = Vector::Zero((horizons + 1) * k);
  Matrix Gh = Matrix::Identity(2, 2);
  for (int h = 0; h <= horizons; ++h) {
    theta(h * k + 1) = (Gh * design.b0)(0);
    const Matrix next = design.G1 * Gh;
    if (lags >= 1) {
      theta(h * k + 2) = next(0, 0);
      theta(h * k + 3) = next(0, 1);
    }
    Gh = next;
  }
  return theta;
}

LpSample gen_lp(const DgpConfig& config, CounterRng& rng) {
  config.validate();
  const LpDesign design = lp_design();
  const std::size_t n = config.n;
  LpSample out;
  if (config.shock_series) {
    out.shock = config.shock_series->head(static_cast<Eigen::Index>(n));
  } else {
    CounterRng shock_rng = rng.split(0);
    out.shock = shock_surrogate(n, shock_rng);
  }
  CounterRng path_rng = rng.split(1);
  const Matrix L = cholesky_factor(design.Sigma);
  out.z.resize(static_cast<Eigen::Index>(n), 2);
  Vector z = Vector::Zero(2);
  for (long t = -config.burn_in; t < static_cast<long>(n); ++t) {
    const double s = t >= 0 ? out.shock(t) : 0.0;
    z = design.G1 * z + design.b0 * s + L * standard_normal(2, path_rng);
    if (t >= 0) out.z.row(t) = z.transpose();
  }
  out.target = out.z.col(0);
  out.controls.resize(static_cast<Eigen::Index>(n), 3);
  out.controls << out.z, out.shock;
  out.theta0 = lp_true_theta(design, config.lp_horizons, config.lp_lags);
  out.irf.resize(config.lp_horizons + 1);
  const Eigen::Index k = 2 + 3 * config.lp_lags;
  for (int h = 0; h <= config.lp_horizons; ++h) out.irf(h) = out.theta0(h * k + 1);
  return out;
}

MgarchDesign draw_mgarch_design(const DgpConfig& config, CounterRng& rng) {
  const Eigen::Index d = static_cast<Eigen::Index>(config.dim);
  MgarchDesign out{Matrix::Identity(d, d), 0.6 * Matrix::Identity(d, d),
                   0.6 * Matrix::Identity(d, d)};
  if (config.design == DesignCase::II) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = 0; i < d; ++i)
        if (i != j && U(rng) < config.mgarch_offdiag_density) out.D(i, j) = config.mgarch_offdiag_value;
  }
  return out;
}

MgarchSample simulate_mgarch(const MgarchDesign& design, std::size_t n, int burn_in,
                             int basis_dim, CounterRng& rng) {
  (void)basis_dim;
  const Eigen::Index d = design.C.rows();
  const Matrix CC = design.C.transpose() * design.C;
  // Unconditional proxy: fixed point of H = C'C + D H D' + B H B'.
  Matrix H = CC;
  for (int it = 0; it < 2000; ++it) {
    const Matrix next = CC + design.D * H * design.D.transpose() + design.B * H * design.B.transpose();
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e12) {
      H = CC;
      break;
    }
    const double change = (next - H).cwiseAbs().maxCoeff();
    H = next;
    if (change < 1e-13) break;
  }
  MgarchSample out;
  out.data.resize(static_cast<Eigen::Index>(n), d);
  auto draw = [&](const Matrix& Ht) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Ht + Ht.transpose()));
    Vector ev = es.eigenvalues();
    if (ev.minCoeff() < 1e-12) {
      out.clipped = true;
      ev = ev.cwiseMax(1e-12);
    }
    const Matrix root = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    return Vector(root * standard_normal(d, rng));
  };
  Vector y = draw(H);
  for (long t = -burn_in; t < static_cast<long>(n); ++t) {
    const Vector Dy = design.D * y;
    H = CC + Dy * Dy.transpose() + design.B * H * design.B.transpose();
    y = draw(H);
    if (t >= 0) out.data.row(t) = y.transpose();
  }
  out.theta0 = pack_bekk(design);
  return out;
}

MgarchSample gen_mgarch(const DgpConfig& config, CounterRng& rng) {
  config.validate();
  CounterRng design_rng = rng.split(0);
  CounterRng path_rng = rng.split(1);
  return simulate_mgarch(draw_mgarch_design(config, design_rng), config.n, config.burn_in,
                         config.basis_dim, path_rng);
}

ErrorSummary summarize_errors(const std::vector<Vector>& estimates, const Vector& theta0) {
  ErrorSummary s;
  s.count = estimates.size();
  if (estimates.empty()) {
    s.mse = s.bias_sq = s.var = kNaN;
    return s;
  }
  const double p = static_cast<double>(theta0.size());
  const double N = static_cast<double>(estimates.size());
  Vector mean = Vector::Zero(theta0.size());
  double sq = 0.0;
  for (const Vector& th : estimates) {
    sq += (th - theta0).squaredNorm();
    mean += th;
  }
  mean /= N;
  s.mse = sq / (p * N);
  s.bias_sq = (mean - theta0).squaredNorm() / p;
  s.var = s.mse - s.bias_sq;
  return s;
}

CoverageSummary summarize_coverage(const std::vector<ReplicationRecord>& records, double truth,
                                   std::size_t level_count) {
  CoverageSummary s;
  std::vector<std::vector<double>> lengths(level_count);
  std::vector<std::size_t> hits(level_count, 0);
  for (const auto& rec : records) {
    if (!rec.ok || !rec.ci_ok) continue;
    ++s.count;
    for (std::size_t l = 0; l < level_count; ++l) {
      if (rec.lower[l] <= truth && truth <= rec.upper[l]) ++hits[l];
      lengths[l].push_back(rec.upper[l] - rec.lower[l]);
    }
  }
  for (std::size_t l = 0; l < level_count; ++l) {
    s.coverage.push_back(s.count ? static_cast<double>(hits[l]) / static_cast<double>(s.count) : kNaN);
    s.median_length.push_back(median(lengths[l]));
  }
  return s;
}

namespace {

struct Problem {
  std::unique_ptr<MomentModel> model;
  Vector init;
  Vector ols;
};

// Fixed parts of the design shared by every replication.
struct SharedDesign {
  VarDesign var;
  Vector shock;
  MgarchDesign mgarch;
  Vector theta0;
};

SharedDesign make_shared_design(const DgpConfig& config, CounterRng design_rng) {
  SharedDesign s;
  switch (config.family) {
    case Family::Var1:
      s.var = draw_var_design(config, design_rng);
      s.theta0 = Eigen::Map<const Vector>(s.var.G1.data(), s.var.G1.size());
      break;
    case Family::Lp:
      s.shock = config.shock_series ? Vector(config.shock_series->head(static_cast<Eigen::Index>(config.n)))
                                    : shock_surrogate(config.n, design_rng);
      s.theta0 = lp_true_theta(lp_design(), config.lp_horizons, config.lp_lags);
      break;
    case Family::Mgarch:
      s.mgarch = draw_mgarch_design(config, design_rng);
      s.theta0 = pack_bekk(s.mgarch);
      break;
  }
  return s;
}

Problem make_problem(const DgpConfig& config, const EstimatorSpec& spec, const SharedDesign& shared,
                     CounterRng& rng) {
  Problem pr;
  const InitMode mode =
      spec.init ? *spec.init : (config.family == Family::Mgarch ? InitMode::Perturbed : InitMode::Ols);
  switch (config.family) {
    case Family::Var1: {
      const VarSample sample = simulate_var1(shared.var, config.n, config.burn_in, rng);
      auto model = std::make_unique<VarMoments>(sample.data, 1);
      pr.ols = ols_var(*model);
      pr.model = std::move(model);
      break;
    }
    case Family::Lp: {
      DgpConfig local = config;
      local.shock_series = shared.shock;
      const LpSample sample = gen_lp(local, rng);
      auto model = std::make_unique<LocalProjectionMoments>(sample.target, sample.shock, sample.controls,
                                                            config.lp_horizons, config.lp_lags);
      pr.ols = ols_lp(*model);
      pr.model = std::move(model);
      break;
    }
    case Family::Mgarch: {
      const MgarchSample sample =
          simulate_mgarch(shared.mgarch, config.n, config.burn_in, config.basis_dim, rng);
      pr.model = std::make_unique<MgarchBekkMoments>(sample.data, config.basis_dim);
      break;
    }
  }
  switch (mode) {
    case InitMode::Ols:
      require(pr.ols.size() > 0, ErrorKind::Configuration,
              "least-squares initialization is not available for this family");
      pr.init = pr.ols;
      break;
    case InitMode::Perturbed:
      pr.init = perturbed_init(shared.theta0, rng, spec.init_sd);
      break;
    case InitMode::Garch: {
      const auto* mg = dynamic_cast<const MgarchBekkMoments*>(pr.model.get());
      require(mg != nullptr, ErrorKind::Configuration,
              "GARCH initialization is only available for mgarch");
      pr.init = mgarch_garch_init(*mg, rng, spec.init_sd);
      break;
    }
  }
  return pr;
}

}  // namespace

MonteCarloReport run_monte_carlo(const DgpConfig& config, const EstimatorSpec& spec,
                                 std::size_t replications, unsigned threads) {
  config.validate();
  require(replications >= 1, ErrorKind::Configuration, "replications must be >= 1");
  for (double level : spec.levels)
    require(level > 0.0 && level < 1.0, ErrorKind::Configuration, "levels must lie in (0, 1)");
  const CounterRng root(config.seed);
  const SharedDesign shared = make_shared_design(config, root.split(0));

  MonteCarloReport report;
  report.config = config;
  report.replications = replications;
  report.theta0 = shared.theta0;
  report.levels = spec.levels;
  if (spec.target) {
    require(*spec.target < static_cast<std::size_t>(shared.theta0.size()), ErrorKind::Configuration,
            "target coordinate out of range");
    report.target = *spec.target;
  } else {
    Eigen::Index first = 0;
    while (first < shared.theta0.size() && shared.theta0(first) == 0.0) ++first;
    require(first < shared.theta0.size(), ErrorKind::Configuration, "theta0 has no nonzero coordinate");
    report.target = static_cast<std::size_t>(first);
  }
  report.records.resize(replications);

  // Pilot tuning: BIC on one extra sample from a dedicated stream.
  EstimatorSpec rep_spec = spec;
  if (!(spec.nu > 0.0 && spec.pi > 0.0) && spec.pilot_tuning) {
    CounterRng pilot_rng = root.split(kPilotStream);
    const Problem pr = make_problem(config, spec, shared, pilot_rng);
    const TuningGrid grid = spec.grid ? *spec.grid
                                      : TuningGrid::log_spaced(pr.model->n(), pr.model->r(),
                                                               spec.grid_size, spec.grid_lo);
    const TuningResult tuned = select_tuning(*pr.model, grid, pr.init, spec.pel, threads);
    rep_spec.nu = tuned.nu;
    rep_spec.pi = tuned.pi;
  }
  report.nu = rep_spec.nu > 0.0 && rep_spec.pi > 0.0 ? rep_spec.nu : kNaN;
  report.pi = rep_spec.nu > 0.0 && rep_spec.pi > 0.0 ? rep_spec.pi : kNaN;

  parallel_for(replications, threads, [&](std::size_t i) {
    const EstimatorSpec& spec = rep_spec;
    ReplicationRecord& rec = report.records[i];
    rec.index = i;
    CounterRng rng = root.split(i + 1);
    try {
      const Problem pr = make_problem(config, spec, shared, rng);
      const MomentModel& model = *pr.model;
      PelFit fit;
      if (spec.nu > 0.0 && spec.pi > 0.0) {
        fit = fit_pel(model, PenaltySpec::scad(spec.pi), PenaltySpec::lasso(spec.nu), pr.init, spec.pel);
      } else {
        const TuningGrid grid =
            spec.grid ? *spec.grid
                      : TuningGrid::log_spaced(model.n(), model.r(), spec.grid_size, spec.grid_lo);
        fit = select_tuning(model, grid, pr.init, spec.pel, 1).fit;
      }
      rec.theta_hat = fit.theta;
      rec.theta_ols = pr.ols;
      rec.nu = fit.nu;
      rec.pi = fit.pi;
      rec.iterations = fit.iterations;
      rec.converged = fit.converged;
      rec.df_theta = fit.active_set.size();
      rec.ok = true;
      if (spec.inference) {
        try {
          InferenceOptions io;
          io.targets = {report.target};
          io.varsigma = spec.varsigma;
          io.kernel = spec.kernel;
          io.bandwidth = spec.bandwidth;
          io.levels = spec.levels;
          io.ppel = spec.ppel;
          const InferenceReport inf = run_inference(model, fit, io);
          rec.estimate = inf.theta_tilde(0);
          rec.std_error = inf.std_errors(0);
          for (std::size_t l = 0; l < spec.levels.size(); ++l) {
            rec.lower.push_back(inf.lower(0, static_cast<Eigen::Index>(l)));
            rec.upper.push_back(inf.upper(0, static_cast<Eigen::Index>(l)));
          }
          rec.ci_ok = std::isfinite(rec.std_error);
          if (!rec.ci_ok) rec.ci_error = "non-finite standard error";
        } catch (const std::exception& e) {
          rec.ci_error = e.what();
        }
      }
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  });

  std::vector<Vector> pel_estimates, ols_estimates;
  for (const auto& rec : report.records) {
    if (!rec.ok) {
      ++report.failures;
      continue;
    }
    pel_estimates.push_back(rec.theta_hat);
    if (rec.theta_ols.size() > 0) ols_estimates.push_back(rec.theta_ols);
  }
  report.pel = summarize_errors(pel_estimates, report.theta0);
  if (!ols_estimates.empty()) report.ols = summarize_errors(ols_estimates, report.theta0);
  report.ci = summarize_coverage(report.records, report.theta0(static_cast<Eigen::Index>(report.target)),
                                 spec.levels.size());
  return report;
}

void write_monte_carlo_csv(std::ostream& out, const MonteCarloReport& report) {
  out << "family,method,case,n,dim,replications,failures,mse,bias_sq,var";
  for (double l : report.levels) out << ",coverage_" << format_level(l);
  for (double l : report.levels) out << ",median_length_" << format_level(l);
  out << '\n';
  const auto row = [&](const std::string& method, const ErrorSummary& s, const CoverageSummary* ci) {
    out << family_name(report.config.family) << ',' << method << ',' << case_name(report.config.design)
        << ',' << report.config.n << ',' << report.config.dim << ',' << report.replications << ','
        << report.failures << ',' << format_double(s.mse) << ',' << format_double(s.bias_sq) << ','
        << format_double(s.var);
    for (std::size_t l = 0; l < report.levels.size(); ++l)
      out << ',' << format_double(ci ? ci->coverage[l] : kNaN);
    for (std::size_t l = 0; l < report.levels.size(); ++l)
      out << ',' << format_double(ci ? ci->median_length[l] : kNaN);
    out << '\n';
  };
  row("PEL", report.pel, &report.ci);
  if (report.ols) row("OLS", *report.ols, nullptr);
}

void write_replication_log(std::ostream& out, const MonteCarloReport& report) {
  const double truth = report.theta0(static_cast<Eigen::Index>(report.target));
  for (const auto& rec : report.records) {
    nlohmann::ordered_json j;
    j["replication"] = rec.index;
    j["ok"] = rec.ok;
    if (!rec.ok) {
      j["error"] = rec.error;
    } else {
      j["sq_error"] = (rec.theta_hat - report.theta0).squaredNorm();
      if (rec.theta_ols.size() > 0) j["ols_sq_error"] = (rec.theta_ols - report.theta0).squaredNorm();
      j["nu"] = rec.nu;
      j["pi"] = rec.pi;
      j["iterations"] = rec.iterations;
      j["converged"] = rec.converged;
      j["df_theta"] = rec.df_theta;
      j["target"] = report.target;
      j["truth"] = truth;
      if (rec.ci_ok) {
        j["estimate"] = rec.estimate;
        j["std_error"] = rec.std_error;
        j["lower"] = rec.lower;
        j["upper"] = rec.upper;
      } else if (!rec.ci_error.empty()) {
        j["ci_error"] = rec.ci_error;
      }
    }
    out << j.dump() << '\n';
  }
}

Decomposition variance_decomposition(const Matrix& G1, const Matrix& Sigma, int horizons) {
  const Eigen::Index d = G1.rows();
  require(G1.cols() == d && Sigma.rows() == d && Sigma.cols() == d, ErrorKind::InvalidArgument,
          "G1 and Sigma must be square of equal size");
  require(horizons >= 1, ErrorKind::Configuration, "horizons must be >= 1");
  require(G1.allFinite() && Sigma.allFinite(), ErrorKind::Data, "non-finite G1 or Sigma");
  const double rho = spectral_radius(G1);
  if (!(rho < 1.0)) {
    std::ostringstream msg;
    msg << "G1 is not stable (spectral radius " << rho << ")";
    throw UnstableSystemError(rho, msg.str());
  }
  for (Eigen::Index j = 0; j < d; ++j)
    require(Sigma(j, j) > 0.0, ErrorKind::Domain, "Sigma must have a positive diagonal");

  Decomposition out;
  out.outdegree.resize(horizons, d);
  Matrix num = Matrix::Zero(d, d);
  Vector den = Vector::Zero(d);
  Matrix Gl = Matrix::Identity(d, d);
  for (int h = 1; h <= horizons; ++h) {
    // add the l = h - 1 term
    const Matrix GS = Gl * Sigma;
    num += GS.cwiseAbs2();
    den += (GS * Gl.transpose()).diagonal();
    Gl = G1 * Gl;
    Matrix D(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!(den(i) > 0.0)) fail(ErrorKind::Domain, "decomposition row " + std::to_string(i) + " is undefined");
      for (Eigen::Index j = 0; j < d; ++j) D(i, j) = num(i, j) / Sigma(j, j) / den(i);
      D.row(i) /= D.row(i).sum();
    }
    out.outdegree.row(h - 1) = D.colwise().sum();
    out.dtilde.push_back(std::move(D));
  }
  return out;
}

}  // namespace pel
