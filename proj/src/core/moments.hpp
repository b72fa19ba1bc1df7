#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <string>

namespace pel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Estimating functions g_t(theta) in R^r over the effective sample
// t = 0..n()-1. Implementations are immutable after construction, so
// concurrent evaluation is safe.
class MomentModel {
 public:
  virtual ~MomentModel() = default;

  virtual std::size_t n() const = 0;
  virtual std::size_t r() const = 0;
  virtual std::size_t p() const = 0;
  virtual std::string name() const = 0;

  // g_t(theta); out has length r.
  virtual void eval(std::size_t t, const Vector& theta, Eigen::Ref<Vector> out) const = 0;
  // dg_t/dtheta^T; out is r x p.
  virtual void jac(std::size_t t, const Vector& theta, Eigen::Ref<Matrix> out) const = 0;

  // All g_t as rows of an n x r matrix. Throws NumericalEvaluationError on the
  // first non-finite row.
  virtual Matrix eval_all(const Vector& theta) const;

  // sum_t w_t J_t(theta)^T lambda.
  virtual Vector weighted_vjp(const Vector& theta, const Vector& w,
                              const Vector& lambda) const;

  // (1/n) sum_t J_t(theta).
  virtual Matrix mean_jacobian(const Vector& theta) const;

 protected:
  void check_theta(const Vector& theta) const;
};

struct SampleMoments {
  Vector gbar;  // r
  Matrix Gbar;  // r x p
  Matrix Vhat;  // r x r, symmetrized
};

SampleMoments sample_moments(const MomentModel& model, const Vector& theta);

// VAR(l): g_t = (z_t - sum_j G_j z_{t-j}) kron (1, z_{t-1}, ..., z_{t-l}).
// theta = vec([G_1 ... G_l]) (column-major), p = l d^2, r = d (l d + 1).
class VarMoments final : public MomentModel {
 public:
  VarMoments(const Matrix& data, int lag, bool demean = false);

  std::size_t n() const override { return static_cast<std::size_t>(Zs_.rows()); }
  std::size_t r() const override { return d_ * (1 + lag_ * d_); }
  std::size_t p() const override { return lag_ * d_ * d_; }
  std::string name() const override { return "var"; }

  void eval(std::size_t t, const Vector& theta, Eigen::Ref<Vector> out) const override;
  void jac(std::size_t t, const Vector& theta, Eigen::Ref<Matrix> out) const override;
  Matrix eval_all(const Vector& theta) const override;
  Vector weighted_vjp(const Vector& theta, const Vector& w,
                      const Vector& lambda) const override;
  Matrix mean_jacobian(const Vector& theta) const override;

  std::size_t dim() const { return d_; }
  int lag() const { return lag_; }
  const Matrix& responses() const { return Zs_; }  // n x d
  const Matrix& lagged() const { return Y_; }      // n x (l d)

 private:
  std::size_t d_;
  int lag_;
  Matrix Zs_;
  Matrix Y_;
};

// Local projections: stacked regressions for h = 0..H, each with
// regressors w_t = (1, shock_t, controls_{t-1}, ..., controls_{t-l}) used as
// their own instruments. All horizons share t = l..n-1-H.
class LocalProjectionMoments final : public MomentModel {
 public:
  LocalProjectionMoments(const Vector& target, const Vector& shock,
                         const Matrix& controls, int horizons, int lags);

  std::size_t n() const override { return static_cast<std::size_t>(W_.rows()); }
  std::size_t r() const override { return (H_ + 1) * k(); }
  std::size_t p() const override { return (H_ + 1) * k(); }
  std::string name() const override { return "lp"; }

  void eval(std::size_t t, const Vector& theta, Eigen::Ref<Vector> out) const override;
  void jac(std::size_t t, const Vector& theta, Eigen::Ref<Matrix> out) const override;
  Matrix eval_all(const Vector& theta) const override;
  Vector weighted_vjp(const Vector& theta, const Vector& w,
                      const Vector& lambda) const override;
  Matrix mean_jacobian(const Vector& theta) const override;

  std::size_t k() const { return static_cast<std::size_t>(W_.cols()); }
  int horizons() const { return H_; }
  // Index of beta_1^{(h)} inside theta.
  std::size_t shock_index(int h) const { return static_cast<std::size_t>(h) * k() + 1; }
  const Matrix& regressors() const { return W_; }  // n x k
  const Matrix& leads() const { return Yh_; }      // n x (H+1)

 private:
  int H_;
  Matrix W_;
  Matrix Yh_;
};

// BEKK(1,1) unconditional moments. theta = (vech(C), vec(D),
// vec(B)) with C lower triangular; basis q^K(y) = first K coordinates.
class MgarchBekkMoments final : public MomentModel {
 public:
  MgarchBekkMoments(const Matrix& data, int basis_dim);

  std::size_t n() const override { return static_cast<std::size_t>(Y_.rows()) - 2; }
  std::size_t r() const override { return K_ * vech_dim() + d_; }
  std::size_t p() const override { return vech_dim() + 2 * d_ * d_; }
  std::string name() const override { return "mgarch"; }

  void eval(std::size_t t, const Vector& theta, Eigen::Ref<Vector> out) const override;
  void jac(std::size_t t, const Vector& theta, Eigen::Ref<Matrix> out) const override;
  Vector weighted_vjp(const Vector& theta, const Vector& w,
                      const Vector& lambda) const override;

  std::size_t dim() const { return d_; }
  std::size_t basis_dim() const { return K_; }
  std::size_t vech_dim() const { return d_ * (d_ + 1) / 2; }
  const Matrix& data() const { return Y_; }

  struct Params {
    Matrix C, D, B;
  };
  Params unpack(const Vector& theta) const;
  Vector pack(const Params& params) const;

 private:
  std::size_t d_;
  std::size_t K_;
  Matrix Y_;
};

// User-supplied estimating functions.
class FunctionalMoments final : public MomentModel {
 public:
  using EvalFn = std::function<void(std::size_t, const Vector&, Eigen::Ref<Vector>)>;
  using JacFn = std::function<void(std::size_t, const Vector&, Eigen::Ref<Matrix>)>;

  FunctionalMoments(std::size_t n, std::size_t r, std::size_t p, EvalFn eval, JacFn jac,
                    std::string name = "custom");

  std::size_t n() const override { return n_; }
  std::size_t r() const override { return r_; }
  std::size_t p() const override { return p_; }
  std::string name() const override { return name_; }
  void eval(std::size_t t, const Vector& theta, Eigen::Ref<Vector> out) const override;
  void jac(std::size_t t, const Vector& theta, Eigen::Ref<Matrix> out) const override;

 private:
  std::size_t n_, r_, p_;
  EvalFn eval_;
  JacFn jac_;
  std::string name_;
};

// vech index of (i, j), i >= j, stacking the lower triangle column by column.
std::size_t vech_index(std::size_t i, std::size_t j, std::size_t d);

}  // namespace pel
