#include "moments.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace pel {

void MomentModel::check_theta(const Vector& theta) const {
  require(static_cast<std::size_t>(theta.size()) == p(), ErrorKind::InvalidArgument,
          name() + ": theta has length " + std::to_string(theta.size()) +
              ", expected " + std::to_string(p()));
  require(theta.allFinite(), ErrorKind::InvalidArgument, name() + ": theta is not finite");
}

Matrix MomentModel::eval_all(const Vector& theta) const {
  check_theta(theta);
  Matrix G(n(), r());
  Vector row(r());
  for (std::size_t t = 0; t < n(); ++t) {
    eval(t, theta, row);
    if (!row.allFinite())
      throw NumericalEvaluationError(static_cast<long>(t),
                                     name() + ": non-finite moment at t=" + std::to_string(t));
    G.row(t) = row.transpose();
  }
  return G;
}

Vector MomentModel::weighted_vjp(const Vector& theta, const Vector& w,
                                 const Vector& lambda) const {
  Vector out = Vector::Zero(p());
  Matrix J(r(), p());
  for (std::size_t t = 0; t < n(); ++t) {
    if (w(t) == 0.0) continue;
    jac(t, theta, J);
    out.noalias() += w(t) * (J.transpose() * lambda);
  }
  return out;
}

Matrix MomentModel::mean_jacobian(const Vector& theta) const {
  check_theta(theta);
  Matrix acc = Matrix::Zero(r(), p());
  Matrix J(r(), p());
  for (std::size_t t = 0; t < n(); ++t) {
    jac(t, theta, J);
    if (!J.allFinite())
      throw NumericalEvaluationError(static_cast<long>(t),
                                     name() + ": non-finite Jacobian at t=" + std::to_string(t));
    acc += J;
  }
  return acc / static_cast<double>(n());
}

SampleMoments sample_moments(const MomentModel& model, const Vector& theta) {
  const Matrix G = model.eval_all(theta);
  const double inv_n = 1.0 / static_cast<double>(model.n());
  SampleMoments out;
  out.gbar = G.colwise().sum().transpose() * inv_n;
  out.Gbar = model.mean_jacobian(theta);
  Matrix V = (G.transpose() * G) * inv_n;
  out.Vhat = 0.5 * (V + V.transpose());
  return out;
}

std::size_t vech_index(std::size_t i, std::size_t j, std::size_t d) {
  const std::size_t column_offset = j == 0 ? 0 : j * d - j * (j - 1) / 2;
  return column_offset + (i - j);
}

// ---------------------------------------------------------------- VAR(l)

VarMoments::VarMoments(const Matrix& data, int lag, bool demean)
    : d_(static_cast<std::size_t>(data.cols())), lag_(lag) {
  require(lag >= 1, ErrorKind::Configuration, "var: lag must be >= 1");
  require(data.cols() >= 1, ErrorKind::Configuration, "var: data has no columns");
  require(data.rows() > lag, ErrorKind::InsufficientData,
          "var: need more than " + std::to_string(lag) + " observations, got " +
              std::to_string(data.rows()));
  require(data.allFinite(), ErrorKind::Data, "var: data contains non-finite values");

  Matrix Z = data;
  if (demean) Z.rowwise() -= Z.colwise().mean();

  const Eigen::Index ne = Z.rows() - lag;
  const Eigen::Index d = Z.cols();
  Zs_ = Z.bottomRows(ne);
  Y_.resize(ne, lag * d);
  for (int j = 1; j <= lag; ++j) Y_.middleCols((j - 1) * d, d) = Z.middleRows(lag - j, ne);
}

namespace {

Eigen::Map<const Matrix> as_matrix(const Vector& theta, Eigen::Index rows, Eigen::Index cols,
                                   Eigen::Index offset = 0) {
  return Eigen::Map<const Matrix>(theta.data() + offset, rows, cols);
}

}  // namespace

void VarMoments::eval(std::size_t t, const Vector& theta, Eigen::Ref<Vector> out) const {
  const Eigen::Index d = static_cast<Eigen::Index>(d_);
  const Eigen::Index ld = Y_.cols();
  const auto Gm = as_matrix(theta, d, ld);
  const Vector e = Zs_.row(t).transpose() - Gm * Y_.row(t).transpose();
  const Eigen::Index nx = ld + 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    out(i * nx) = e(i);
    out.segment(i * nx + 1, ld) = e(i) * Y_.row(t).transpose();
  }
}

void VarMoments::jac(std::size_t t, const Vector&, Eigen::Ref<Matrix> out) const {
  const Eigen::Index d = static_cast<Eigen::Index>(d_);
  const Eigen::Index ld = Y_.cols();
  const Eigen::Index nx = ld + 1;
  out.setZero();
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index c = 0; c < ld; ++c) {
      const double yc = Y_(t, c);
      out(i * nx, c * d + i) = -yc;
      for (Eigen::Index k = 0; k < ld; ++k) out(i * nx + 1 + k, c * d + i) = -Y_(t, k) * yc;
    }
}

Matrix VarMoments::eval_all(const Vector& theta) const {
  check_theta(theta);
  const Eigen::Index d = static_cast<Eigen::Index>(d_);
  const Eigen::Index ld = Y_.cols();
  const Eigen::Index nx = ld + 1;
  const auto Gm = as_matrix(theta, d, ld);
  const Matrix E = Zs_ - Y_ * Gm.transpose();
  Matrix out(E.rows(), r());
  for (Eigen::Index i = 0; i < d; ++i) {
    out.col(i * nx) = E.col(i);
    out.middleCols(i * nx + 1, ld) = Y_.array().colwise() * E.col(i).array();
  }
  for (Eigen::Index t = 0; t < out.rows(); ++t)
    if (!out.row(t).allFinite())
      throw NumericalEvaluationError(static_cast<long>(t),
                                     "var: non-finite moment at t=" + std::to_string(t));
  return out;
}

Vector VarMoments::weighted_vjp(const Vector&, const Vector& w, const Vector& lambda) const {
  const Eigen::Index d = static_cast<Eigen::Index>(d_);
  const Eigen::Index ld = Y_.cols();
  const Eigen::Index nx = ld + 1;
  // Lambda reshaped to d x (1 + l d): row i holds the multipliers of e_i x.
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      L(lambda.data(), d, nx);
  // (Lambda x_t)_i = L(i,0) + L(i,1:) y_t
  Matrix Lx = Y_ * L.rightCols(ld).transpose();  // n x d
  Lx.rowwise() += L.col(0).transpose();
  Lx.array().colwise() *= w.array();
  const Matrix grad = -(Lx.transpose() * Y_);  // d x ld
  return Eigen::Map<const Vector>(grad.data(), grad.size());
}

Matrix VarMoments::mean_jacobian(const Vector& theta) const {
  check_theta(theta);
  const Eigen::Index d = static_cast<Eigen::Index>(d_);
  const Eigen::Index ld = Y_.cols();
  const Eigen::Index nx = ld + 1;
  const double inv_n = 1.0 / static_cast<double>(n());
  const Vector ybar = Y_.colwise().sum().transpose() * inv_n;
  const Matrix Syy = (Y_.transpose() * Y_) * inv_n;
  Matrix out = Matrix::Zero(r(), p());
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index c = 0; c < ld; ++c) {
      out(i * nx, c * d + i) = -ybar(c);
      out.block(i * nx + 1, c * d + i, ld, 1) = -Syy.col(c);
    }
  return out;
}

// ---------------------------------------------------------------- LP

LocalProjectionMoments::LocalProjectionMoments(const Vector& target, const Vector& shock,
                                               const Matrix& controls, int horizons, int lags)
    : H_(horizons) {
  const Eigen::Index n = target.size();
  require(horizons >= 0, ErrorKind::Configuration, "lp: horizons must be >= 0");
  require(lags >= 0, ErrorKind::Configuration, "lp: lags must be >= 0");
  require(shock.size() == n, ErrorKind::Data, "lp: shock length differs from target");
  require(controls.cols() == 0 || controls.rows() == n, ErrorKind::Data,
          "lp: controls row count differs from target");
  require(target.allFinite() && shock.allFinite() && controls.allFinite(), ErrorKind::Data,
          "lp: data contains non-finite values");
  const int eff_lags = controls.cols() == 0 ? 0 : lags;
  require(n > horizons + eff_lags, ErrorKind::InsufficientData,
          "lp: sample of " + std::to_string(n) + " cannot cover horizon " +
              std::to_string(horizons) + " with " + std::to_string(eff_lags) + " lags");

  const Eigen::Index q = controls.cols();
  const Eigen::Index k = 2 + eff_lags * q;
  const Eigen::Index ne = n - eff_lags - horizons;
  W_.resize(ne, k);
  Yh_.resize(ne, horizons + 1);
  for (Eigen::Index i = 0; i < ne; ++i) {
    const Eigen::Index t = i + eff_lags;
    W_(i, 0) = 1.0;
    W_(i, 1) = shock(t);
    for (int l = 1; l <= eff_lags; ++l) W_.block(i, 2 + (l - 1) * q, 1, q) = controls.row(t - l);
    for (int h = 0; h <= horizons; ++h) Yh_(i, h) = target(t + h);
  }
}

void LocalProjectionMoments::eval(std::size_t t, const Vector& theta,
                                  Eigen::Ref<Vector> out) const {
  const Eigen::Index kk = static_cast<Eigen::Index>(k());
  for (int h = 0; h <= H_; ++h) {
    const double resid = Yh_(t, h) - W_.row(t).dot(theta.segment(h * kk, kk));
    out.segment(h * kk, kk) = resid * W_.row(t).transpose();
  }
}

void LocalProjectionMoments::jac(std::size_t t, const Vector&, Eigen::Ref<Matrix> out) const {
  const Eigen::Index kk = static_cast<Eigen::Index>(k());
  out.setZero();
  const Matrix block = -(W_.row(t).transpose() * W_.row(t));
  for (int h = 0; h <= H_; ++h) out.block(h * kk, h * kk, kk, kk) = block;
}

Matrix LocalProjectionMoments::eval_all(const Vector& theta) const {
  check_theta(theta);
  const Eigen::Index kk = static_cast<Eigen::Index>(k());
  const auto B = as_matrix(theta, kk, H_ + 1);
  const Matrix E = Yh_ - W_ * B;  // n x (H+1)
  Matrix out(W_.rows(), r());
  for (int h = 0; h <= H_; ++h)
    out.middleCols(h * kk, kk) = W_.array().colwise() * E.col(h).array();
  return out;
}

Vector LocalProjectionMoments::weighted_vjp(const Vector&, const Vector& w,
                                            const Vector& lambda) const {
  const Eigen::Index kk = static_cast<Eigen::Index>(k());
  const auto L = as_matrix(lambda, kk, H_ + 1);
  Matrix WL = W_ * L;  // n x (H+1): lambda_h^T w_t
  WL.array().colwise() *= w.array();
  const Matrix grad = -(W_.transpose() * WL);  // k x (H+1)
  return Eigen::Map<const Vector>(grad.data(), grad.size());
}

Matrix LocalProjectionMoments::mean_jacobian(const Vector& theta) const {
  check_theta(theta);
  const Eigen::Index kk = static_cast<Eigen::Index>(k());
  const Matrix block = -(W_.transpose() * W_) / static_cast<double>(n());
  Matrix out = Matrix::Zero(r(), p());
  for (int h = 0; h <= H_; ++h) out.block(h * kk, h * kk, kk, kk) = block;
  return out;
}

// ---------------------------------------------------------------- MGARCH-BEKK

MgarchBekkMoments::MgarchBekkMoments(const Matrix& data, int basis_dim)
    : d_(static_cast<std::size_t>(data.cols())), K_(static_cast<std::size_t>(basis_dim)), Y_(data) {
  require(data.cols() >= 1, ErrorKind::Configuration, "mgarch: data has no columns");
  require(basis_dim >= 1 && basis_dim <= data.cols(), ErrorKind::Configuration,
          "mgarch: basis dimension K=" + std::to_string(basis_dim) + " must lie in [1, " +
              std::to_string(data.cols()) + "]");
  require(data.rows() >= 3, ErrorKind::InsufficientData, "mgarch: need at least 3 observations");
  require(data.allFinite(), ErrorKind::Data, "mgarch: data contains non-finite values");
}

MgarchBekkMoments::Params MgarchBekkMoments::unpack(const Vector& theta) const {
  const Eigen::Index d = static_cast<Eigen::Index>(d_);
  Params out{Matrix::Zero(d, d), Matrix(d, d), Matrix(d, d)};
  for (std::size_t j = 0; j < d_; ++j)
    for (std::size_t i = j; i < d_; ++i) out.C(i, j) = theta(vech_index(i, j, d_));
  const Eigen::Index off = static_cast<Eigen::Index>(vech_dim());
  out.D = as_matrix(theta, d, d, off);
  out.B = as_matrix(theta, d, d, off + d * d);
  return out;
}

Vector MgarchBekkMoments::pack(const Params& params) const {
  const Eigen::Index d = static_cast<Eigen::Index>(d_);
  Vector theta(p());
  for (std::size_t j = 0; j < d_; ++j)
    for (std::size_t i = j; i < d_; ++i) theta(vech_index(i, j, d_)) = params.C(i, j);
  const Eigen::Index off = static_cast<Eigen::Index>(vech_dim());
  theta.segment(off, d * d) = Eigen::Map<const Vector>(params.D.data(), d * d);
  theta.segment(off + d * d, d * d) = Eigen::Map<const Vector>(params.B.data(), d * d);
  return theta;
}

void MgarchBekkMoments::eval(std::size_t t, const Vector& theta, Eigen::Ref<Vector> out) const {
  const std::size_t s = t + 2;
  const Params P = unpack(theta);
  const Vector y = Y_.row(s).transpose();
  const Vector u = Y_.row(s - 1).transpose();
  const Vector Du = P.D * u;
  const Vector Bu = P.B * u;
  const Matrix R2 = y * y.transpose() - P.C.transpose() * P.C - Du * Du.transpose();
  const Matrix R1 = R2 - Bu * Bu.transpose();
  const std::size_t K = K_;
  for (std::size_t j = 0; j < d_; ++j)
    for (std::size_t i = j; i < d_; ++i) {
      const std::size_t v = vech_index(i, j, d_);
      for (std::size_t k = 0; k < K; ++k) out(v * K + k) = R1(i, j) * Y_(s - 2, k);
    }
  out.tail(d_) = R2 * u;
}

void MgarchBekkMoments::jac(std::size_t t, const Vector& theta, Eigen::Ref<Matrix> out) const {
  const std::size_t s = t + 2;
  const Params P = unpack(theta);
  const Vector u = Y_.row(s - 1).transpose();
  const Vector Du = P.D * u;
  const Vector Bu = P.B * u;
  const std::size_t K = K_;
  const std::size_t r1 = K * vech_dim();
  out.setZero();

  // Every parameter perturbs the residual matrices by a symmetric rank-2 term
  // S = e_x w^T + w e_x^T; column = -vech(S) kron q (first block) and -S u
  // (second block, skipped for B).
  Vector w(d_);
  const auto fill = [&](std::size_t col, std::size_t x, bool in_second_block) {
    for (std::size_t j = 0; j < d_; ++j)
      for (std::size_t i = j; i < d_; ++i) {
        double sij = 0.0;
        if (i == x) sij += w(j);
        if (j == x) sij += w(i);
        if (sij == 0.0) continue;
        const std::size_t v = vech_index(i, j, d_);
        for (std::size_t k = 0; k < K; ++k) out(v * K + k, col) = -sij * Y_(s - 2, k);
      }
    if (in_second_block) {
      // S u = e_x (w.u) + w u_x
      const double wu = w.dot(u);
      for (std::size_t i = 0; i < d_; ++i) out(r1 + i, col) -= w(i) * u(x);
      out(r1 + x, col) -= wu;
    }
  };

  // C_{ab}, a >= b: x = b, w = C(a, :)
  for (std::size_t b = 0; b < d_; ++b)
    for (std::size_t a = b; a < d_; ++a) {
      w = P.C.row(a).transpose();
      fill(vech_index(a, b, d_), b, true);
    }
  const std::size_t offD = vech_dim();
  const std::size_t offB = offD + d_ * d_;
  // D_{ab}: x = a, w = u_b D u
  for (std::size_t b = 0; b < d_; ++b)
    for (std::size_t a = 0; a < d_; ++a) {
      w = u(b) * Du;
      fill(offD + b * d_ + a, a, true);
      w = u(b) * Bu;
      fill(offB + b * d_ + a, a, false);
    }
}

Vector MgarchBekkMoments::weighted_vjp(const Vector& theta, const Vector& w,
                                       const Vector& lambda) const {
  const Params P = unpack(theta);
  const Eigen::Index d = static_cast<Eigen::Index>(d_);
  const std::size_t K = K_;
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      L1(lambda.data(), static_cast<Eigen::Index>(vech_dim()), static_cast<Eigen::Index>(K));
  const Vector l2 = lambda.tail(d_);

  Matrix sumM = Matrix::Zero(d, d);  // sum w_t (M_t + M2_t)
  Matrix gD = Matrix::Zero(d, d);
  Matrix gB = Matrix::Zero(d, d);
  Matrix M(d, d);
  for (std::size_t t = 0; t < n(); ++t) {
    if (w(t) == 0.0) continue;
    const std::size_t s = t + 2;
    const Vector u = Y_.row(s - 1).transpose();
    const Vector q = Y_.row(s - 2).head(K).transpose();
    const Vector sv = L1 * q;
    for (std::size_t j = 0; j < d_; ++j)
      for (std::size_t i = j; i < d_; ++i) {
        const double val = sv(vech_index(i, j, d_));
        if (i == j) {
          M(i, i) = val;
        } else {
          M(i, j) = 0.5 * val;
          M(j, i) = 0.5 * val;
        }
      }
    const Matrix M2 = 0.5 * (l2 * u.transpose() + u * l2.transpose());
    const Vector Du = P.D * u;
    const Vector Bu = P.B * u;
    sumM.noalias() += w(t) * (M + M2);
    gD.noalias() += w(t) * ((M + M2) * Du) * u.transpose();
    gB.noalias() += w(t) * (M * Bu) * u.transpose();
  }
  const Matrix gC = -2.0 * P.C * sumM;
  gD *= -2.0;
  gB *= -2.0;

  Vector out(p());
  for (std::size_t j = 0; j < d_; ++j)
    for (std::size_t i = j; i < d_; ++i) out(vech_index(i, j, d_)) = gC(i, j);
  const Eigen::Index off = static_cast<Eigen::Index>(vech_dim());
  out.segment(off, d * d) = Eigen::Map<const Vector>(gD.data(), d * d);
  out.segment(off + d * d, d * d) = Eigen::Map<const Vector>(gB.data(), d * d);
  return out;
}

// ---------------------------------------------------------------- custom

FunctionalMoments::FunctionalMoments(std::size_t n, std::size_t r, std::size_t p, EvalFn eval,
                                     JacFn jac, std::string name)
    : n_(n), r_(r), p_(p), eval_(std::move(eval)), jac_(std::move(jac)), name_(std::move(name)) {
  require(n >= 1 && r >= 1 && p >= 1, ErrorKind::Configuration,
          "custom moments: dimensions must be positive");
  require(static_cast<bool>(eval_) && static_cast<bool>(jac_), ErrorKind::Configuration,
          "custom moments: eval and jac callbacks are required");
}

void FunctionalMoments::eval(std::size_t t, const Vector& theta, Eigen::Ref<Vector> out) const {
  eval_(t, theta, out);
}

void FunctionalMoments::jac(std::size_t t, const Vector& theta, Eigen::Ref<Matrix> out) const {
  jac_(t, theta, out);
}

}  // namespace pel
