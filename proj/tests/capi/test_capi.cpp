// Exercises the shared library through its C header only.

#include <pel/pel.h>

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"

namespace {

std::vector<double> var_series(std::size_t n, std::size_t d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> z(n * d, 0.0);
  std::vector<double> prev(d, 0.0);
  for (std::size_t t = 0; t < n + 50; ++t) {
    std::vector<double> cur(d);
    for (std::size_t i = 0; i < d; ++i) cur[i] = N(rng);
    cur[0] += 0.5 * prev[1 % d];
    if (d > 2) cur[2] += 0.4 * prev[2];
    if (t >= 50)
      for (std::size_t i = 0; i < d; ++i) z[(t - 50) * d + i] = cur[i];
    prev = cur;
  }
  return z;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CApiModel : ::testing::Test {
  static constexpr std::size_t n = 150, d = 3;
  pel_model* model = nullptr;
  void SetUp() override {
    const auto z = var_series(n, d, 11);
    ASSERT_EQ(pel_model_var(z.data(), n, d, 1, 0, &model), PEL_OK) << pel_last_error();
  }
  void TearDown() override { pel_model_free(model); }
};

}  // namespace

TEST(CApi, StatusNamesAreDistinct) {
  std::vector<std::string> names;
  for (int s = PEL_OK; s <= PEL_ERR_INTERNAL; ++s)
    names.emplace_back(pel_status_name(static_cast<pel_status>(s)));
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j) EXPECT_NE(names[i], names[j]);
  EXPECT_STREQ(pel_status_name(PEL_ERR_INFEASIBLE_PROJECTION), "infeasible_projection");
}

TEST(CApi, NullArgumentsAreRejected) {
  pel_model* model = nullptr;
  EXPECT_EQ(pel_model_var(nullptr, 10, 2, 1, 0, &model), PEL_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(pel_last_error()), "");
  EXPECT_TRUE(std::isnan(pel_last_error_detail()));
  EXPECT_EQ(model, nullptr);
  pel_model_free(nullptr);
  pel_fit_free(nullptr);
}

TEST(CApi, LastErrorIsPerThread) {
  ASSERT_EQ(pel_table_read("/nonexistent/input.csv", nullptr), PEL_ERR_INVALID_ARGUMENT);
  std::string other;
  std::thread([&] { other = pel_last_error(); }).join();
  EXPECT_EQ(other, "");
  EXPECT_NE(std::string(pel_last_error()), "");
}

TEST(CApi, FormatDoubleRoundTrips) {
  char buf[64];
  const double v = 0.1 + 0.2;
  const std::size_t len = pel_format_double(v, buf, sizeof buf);
  EXPECT_EQ(len, std::string(buf).size());
  EXPECT_EQ(std::strtod(buf, nullptr), v);
  pel_format_double(std::nan(""), buf, sizeof buf);
  EXPECT_STREQ(buf, "NA");
  char tiny[4];
  EXPECT_GT(pel_format_double(v, tiny, sizeof tiny), 3u);
  EXPECT_EQ(std::string(tiny).size(), 3u);
}

TEST(CApi, TableReadAndMissingFile) {
  const std::string path = ::testing::TempDir() + "capi_table.csv";
  std::ofstream(path) << "a,b\n1,2\n3,4.5\n";
  pel_table* t = nullptr;
  ASSERT_EQ(pel_table_read(path.c_str(), &t), PEL_OK);
  EXPECT_EQ(pel_table_rows(t), 2u);
  EXPECT_EQ(pel_table_cols(t), 2u);
  EXPECT_STREQ(pel_table_column_name(t, 1), "b");
  std::size_t col = 9;
  EXPECT_EQ(pel_table_find(t, "b", &col), PEL_OK);
  EXPECT_EQ(col, 1u);
  EXPECT_EQ(pel_table_find(t, "c", &col), PEL_ERR_DATA);
  EXPECT_EQ(pel_table_data(t)[3], 4.5);
  pel_table_free(t);

  EXPECT_EQ(pel_table_read("/nonexistent/input.csv", &t), PEL_ERR_IO);
  EXPECT_NE(std::string(pel_last_error()).find("/nonexistent/input.csv"), std::string::npos);
}

TEST_F(CApiModel, DimensionsOfVarModel) {
  std::size_t nn = 0, r = 0, p = 0;
  ASSERT_EQ(pel_model_dims(model, &nn, &r, &p), PEL_OK);
  EXPECT_EQ(nn, n - 1);
  EXPECT_EQ(p, d * d);
  EXPECT_EQ(r, d * (d + 1));
  EXPECT_STREQ(pel_model_family(model), "var");
}

TEST_F(CApiModel, GarchStartNeedsMgarch) {
  std::vector<double> theta(d * d);
  EXPECT_EQ(pel_model_garch_init(model, 1, 0.5, theta.data()), PEL_ERR_CONFIGURATION);
}

TEST_F(CApiModel, ResidualCovarianceMatchesDirectComputation) {
  std::vector<double> theta(d * d, 0.0);
  std::vector<double> sigma(d * d);
  ASSERT_EQ(pel_model_var_residual_cov(model, theta.data(), sigma.data()), PEL_OK);
  // At theta = 0 the residuals are the responses z_1..z_{n-1}.
  const auto z = var_series(n, d, 11);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t t = 1; t < n; ++t) s += z[t * d + i] * z[t * d + j];
      EXPECT_NEAR(sigma[i * d + j], s / (n - 1), 1e-12);
    }
}

TEST_F(CApiModel, FixedFitAndDualAtEstimateAgree) {
  std::vector<double> theta0(d * d);
  ASSERT_EQ(pel_model_ols(model, theta0.data()), PEL_OK);
  pel_fit* fit = nullptr;
  ASSERT_EQ(pel_fit_fixed(model, 0.05, 0.05, theta0.data(), nullptr, &fit), PEL_OK)
      << pel_last_error();
  pel_fit_summary s;
  ASSERT_EQ(pel_fit_get_summary(fit, &s), PEL_OK);
  EXPECT_EQ(s.p, d * d);
  EXPECT_EQ(s.r, d * (d + 1));
  EXPECT_TRUE(s.dual_converged);
  EXPECT_LT(s.kkt_residual, 1e-6);
  EXPECT_EQ(pel_fit_tuning_count(fit), 1u);

  std::vector<double> theta(s.p), lambda(s.r);
  ASSERT_EQ(pel_fit_theta(fit, theta.data()), PEL_OK);
  ASSERT_EQ(pel_fit_lambda(fit, lambda.data()), PEL_OK);

  pel_fit* at = nullptr;
  ASSERT_EQ(pel_fit_at(model, 0.05, 0.05, theta.data(), nullptr, &at), PEL_OK);
  std::vector<double> lambda_at(s.r);
  ASSERT_EQ(pel_fit_lambda(at, lambda_at.data()), PEL_OK);
  for (std::size_t j = 0; j < s.r; ++j) EXPECT_NEAR(lambda[j], lambda_at[j], 1e-6);
  pel_fit_summary sa;
  ASSERT_EQ(pel_fit_get_summary(at, &sa), PEL_OK);
  EXPECT_NEAR(sa.bic, s.bic, 1e-6);
  pel_fit_free(at);
  pel_fit_free(fit);
}

TEST_F(CApiModel, TunedFitPicksSmallestBic) {
  std::size_t nn, r, p;
  ASSERT_EQ(pel_model_dims(model, &nn, &r, &p), PEL_OK);
  std::vector<double> grid(3), theta0(p);
  ASSERT_EQ(pel_default_grid(nn, r, 3, 0.1, 1.0, grid.data()), PEL_OK);
  EXPECT_NEAR(grid[2], std::sqrt(std::log(double(r)) / double(nn)), 1e-12);
  ASSERT_EQ(pel_model_ols(model, theta0.data()), PEL_OK);
  pel_fit* fit = nullptr;
  ASSERT_EQ(pel_fit_tuned(model, grid.data(), 3, grid.data(), 3, theta0.data(), nullptr, 1, &fit),
            PEL_OK);
  pel_fit_summary s;
  ASSERT_EQ(pel_fit_get_summary(fit, &s), PEL_OK);
  ASSERT_EQ(pel_fit_tuning_count(fit), 9u);
  double best = INFINITY;
  for (std::size_t i = 0; i < 9; ++i) {
    pel_tuning_entry e;
    ASSERT_EQ(pel_fit_tuning_entry(fit, i, &e), PEL_OK);
    EXPECT_EQ(e.nu, grid[i / 3]);
    EXPECT_EQ(e.pi, grid[i % 3]);
    if (e.ok) best = std::min(best, e.bic);
  }
  EXPECT_EQ(s.bic, best);
  pel_tuning_entry e;
  EXPECT_EQ(pel_fit_tuning_entry(fit, 9, &e), PEL_ERR_INVALID_ARGUMENT);
  pel_fit_free(fit);
}

TEST_F(CApiModel, InferenceRowsAndNestedIntervals) {
  std::vector<double> theta0(d * d);
  ASSERT_EQ(pel_model_ols(model, theta0.data()), PEL_OK);
  pel_fit* fit = nullptr;
  ASSERT_EQ(pel_fit_fixed(model, 0.05, 0.05, theta0.data(), nullptr, &fit), PEL_OK);
  const std::size_t targets[] = {0, 3};
  pel_inference_options o;
  pel_inference_options_default(&o);
  pel_report* report = nullptr;
  ASSERT_EQ(pel_infer(model, fit, targets, 2, &o, &report), PEL_OK) << pel_last_error();
  pel_report_summary s;
  ASSERT_EQ(pel_report_get_summary(report, &s), PEL_OK);
  EXPECT_EQ(s.m, 2u);
  EXPECT_EQ(s.n_levels, 3u);
  const double nn = double(n - 1);
  EXPECT_NEAR(s.varsigma, 0.2 * std::pow(nn, -1.0 / 3.0), 1e-15);
  EXPECT_NEAR(s.bandwidth, std::pow(nn, 0.2), 1e-12);
  for (std::size_t row = 0; row < 2; ++row) {
    std::size_t coord;
    double est, se, t, lo[3], hi[3];
    ASSERT_EQ(pel_report_row(report, row, &coord, &est, &se, &t, lo, hi), PEL_OK);
    EXPECT_EQ(coord, targets[row]);
    EXPECT_GT(se, 0.0);
    EXPECT_NEAR(t, est / se, 1e-12);
    for (int l = 0; l < 3; ++l) {
      EXPECT_LT(lo[l], est);
      EXPECT_GT(hi[l], est);
      EXPECT_NEAR(est - lo[l], hi[l] - est, 1e-12);
    }
    EXPECT_LT(hi[0] - lo[0], hi[1] - lo[1]);
    EXPECT_LT(hi[1] - lo[1], hi[2] - lo[2]);
  }
  const std::string path = ::testing::TempDir() + "capi_report.csv";
  ASSERT_EQ(pel_report_write_csv(report, path.c_str()), PEL_OK);
  const std::string text = slurp(path);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "coordinate,estimate,std_error,tstat,lo_90,hi_90,lo_95,hi_95,lo_99,hi_99");
  pel_report_free(report);

  const std::size_t bad[] = {d * d};
  EXPECT_NE(pel_infer(model, fit, bad, 1, &o, &report), PEL_OK);
  const double bad_level = 1.5;
  o.levels = &bad_level;
  o.n_levels = 1;
  EXPECT_EQ(pel_infer(model, fit, targets, 1, &o, &report), PEL_ERR_CONFIGURATION);
  pel_fit_free(fit);
}

TEST(CApi, ParsersRejectUnknownLabels) {
  pel_kernel k;
  EXPECT_EQ(pel_kernel_parse("qs", &k), PEL_OK);
  EXPECT_EQ(k, PEL_KERNEL_QS);
  EXPECT_EQ(pel_kernel_parse("bartlett", &k), PEL_ERR_CONFIGURATION);
  pel_family f;
  EXPECT_EQ(pel_family_parse("mgarch", &f), PEL_OK);
  EXPECT_EQ(f, PEL_FAMILY_MGARCH);
  EXPECT_EQ(pel_family_parse("var2", &f), PEL_ERR_CONFIGURATION);
  pel_case c;
  EXPECT_EQ(pel_case_parse("II", &c), PEL_OK);
  EXPECT_EQ(c, PEL_CASE_II);
  EXPECT_EQ(pel_case_parse("III", &c), PEL_ERR_CONFIGURATION);
}

TEST(CApi, DecompositionIdentityAndOracle) {
  const double zero[4] = {0, 0, 0, 0};
  const double sigma[4] = {1.0, 0.3, 0.3, 2.0};
  pel_decomp* dec = nullptr;
  ASSERT_EQ(pel_decompose(zero, sigma, 2, 3, &dec), PEL_OK);
  EXPECT_EQ(pel_decomp_dim(dec), 2u);
  EXPECT_EQ(pel_decomp_horizons(dec), 3u);
  double table[4];
  ASSERT_EQ(pel_decomp_table(dec, 3, table), PEL_OK);
  // With no dynamics the normalized table depends only on Sigma.
  pel::oracle::Matrix S(2, 2);
  S << 1.0, 0.3, 0.3, 2.0;
  const pel::oracle::Matrix D0 =
      pel::oracle::vardecomp_2x2_h2(pel::oracle::Matrix::Zero(2, 2), S);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(table[i * 2 + j], D0(i, j), 1e-14);
  EXPECT_EQ(pel_decomp_table(dec, 4, table), PEL_ERR_INVALID_ARGUMENT);
  pel_decomp_free(dec);

  const double G[4] = {0.5, 0.2, -0.1, 0.3};
  ASSERT_EQ(pel_decompose(G, sigma, 2, 2, &dec), PEL_OK);
  ASSERT_EQ(pel_decomp_table(dec, 2, table), PEL_OK);
  pel::oracle::Matrix Gm(2, 2);
  Gm << 0.5, 0.2, -0.1, 0.3;
  const pel::oracle::Matrix D = pel::oracle::vardecomp_2x2_h2(Gm, S);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(table[i * 2 + j], D(i, j), 1e-12);
  double out[4];
  ASSERT_EQ(pel_decomp_outdegree(dec, out), PEL_OK);
  EXPECT_NEAR(out[2] + out[3], 2.0, 1e-12);
  pel_decomp_free(dec);
}

TEST(CApi, UnstableTransitionReportsRadius) {
  const double G[4] = {1.3, 0.0, 0.0, 0.2};
  const double S[4] = {1, 0, 0, 1};
  pel_decomp* dec = nullptr;
  EXPECT_EQ(pel_decompose(G, S, 2, 5, &dec), PEL_ERR_SOLVER_FAILURE);
  EXPECT_NEAR(pel_last_error_detail(), 1.3, 1e-12);
  EXPECT_EQ(dec, nullptr);
}

TEST(CApi, SimulationIsSeededAndThreadIndependent) {
  pel_sim_config c;
  pel_sim_config_default(&c);
  c.n = 40;
  c.dim = 3;
  c.seed = 7;
  pel_sim_estimator e;
  pel_sim_estimator_default(&e);
  e.nu = 0.1;
  e.pi = 0.05;
  const std::string a = ::testing::TempDir() + "capi_mc_a.csv";
  const std::string b = ::testing::TempDir() + "capi_mc_b.csv";
  pel_mc* one = nullptr;
  pel_mc* two = nullptr;
  ASSERT_EQ(pel_simulate(&c, &e, 3, 1, &one), PEL_OK) << pel_last_error();
  ASSERT_EQ(pel_simulate(&c, &e, 3, 2, &two), PEL_OK);
  ASSERT_EQ(pel_mc_write_csv(one, a.c_str()), PEL_OK);
  ASSERT_EQ(pel_mc_write_csv(two, b.c_str()), PEL_OK);
  EXPECT_EQ(slurp(a), slurp(b));
  pel_mc_summary s;
  ASSERT_EQ(pel_mc_get_summary(one, &s), PEL_OK);
  EXPECT_EQ(s.replications, 3u);
  EXPECT_EQ(s.p, 9u);
  EXPECT_EQ(s.nu, 0.1);
  EXPECT_TRUE(s.has_ols);
  EXPECT_NEAR(s.mse, s.bias_sq + s.var, 1e-15);
  EXPECT_NE(s.target_truth, 0.0);
  double cov[3], len[3];
  ASSERT_EQ(pel_mc_coverage(one, cov, len), PEL_OK);
  for (double v : cov)
    if (!std::isnan(v)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  pel_mc_free(one);
  pel_mc_free(two);

  c.design = static_cast<pel_case>(5);
  EXPECT_EQ(pel_simulate(&c, &e, 1, 1, &one), PEL_ERR_CONFIGURATION);
}
