#pragma once

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "stvar/common.hpp"

namespace stvar {

/// VAR(p) process: X_t = Phi_1 X_{t-1} + ... + Phi_p X_{t-p} + eps_t,
/// eps_t ~ N(0, Sigma). Immutable after construction.
class VarModel {
 public:
  VarModel(std::vector<Matrix> phis, Matrix sigma)
      : phis_(std::move(phis)), sigma_(std::move(sigma)) {
    if (phis_.empty()) throw DimensionError("VarModel: needs at least one lag matrix");
    const Index m = phis_.front().rows();
    for (const Matrix& phi : phis_) {
      if (phi.rows() != m || phi.cols() != m)
        throw DimensionError("VarModel: all transition matrices must be m x m");
      if (!phi.allFinite()) throw DataError("VarModel: non-finite transition entry");
    }
    if (sigma_.rows() != m || sigma_.cols() != m)
      throw DimensionError("VarModel: sigma must be m x m");
    if (!sigma_.allFinite()) throw DataError("VarModel: non-finite sigma entry");
    if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw DataError("VarModel: sigma not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma_);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw DataError("VarModel: sigma not positive definite");
  }

  int order() const { return static_cast<int>(phis_.size()); }
  int dim() const { return static_cast<int>(phis_.front().rows()); }
  const std::vector<Matrix>& phis() const { return phis_; }
  const Matrix& sigma() const { return sigma_; }

 private:
  std::vector<Matrix> phis_;
  Matrix sigma_;
};

/// Observed multivariate series; values(t, s) is site s at time point t
/// (row 0 is the earliest observation).
struct Panel {
  Matrix values;

  Index t_len() const { return values.rows(); }
  Index sites() const { return values.cols(); }
};

/// Coefficient matrix of the stacked regression: (p*m) x m, block row l
/// holding Phi_{l+1}'. Column s collects everything feeding site s.
class CoefficientStack {
 public:
  CoefficientStack(int p, int m) : p_(p), m_(m), b_(Matrix::Zero(Index(p) * m, m)) {
    if (p < 1 || m < 1) throw DimensionError("CoefficientStack: p and m must be positive");
  }

  CoefficientStack(int p, int m, Matrix b) : p_(p), m_(m), b_(std::move(b)) {
    if (b_.rows() != Index(p) * m || b_.cols() != m)
      throw DimensionError("CoefficientStack: matrix shape inconsistent with (p, m)");
  }

  static CoefficientStack from_phis(const std::vector<Matrix>& phis) {
    const int p = static_cast<int>(phis.size());
    const int m = static_cast<int>(phis.front().rows());
    CoefficientStack stack(p, m);
    for (int l = 0; l < p; ++l) {
      if (phis[l].rows() != m || phis[l].cols() != m)
        throw DimensionError("from_phis: lag matrix shape mismatch");
      stack.b_.middleRows(Index(l) * m, m) = phis[l].transpose();
    }
    return stack;
  }

  int order() const { return p_; }
  int dim() const { return m_; }
  const Matrix& matrix() const { return b_; }
  Matrix& matrix() { return b_; }

  /// Phi_{l+1, s s'}: the (l+1)-lagged influence of site s' on site s.
  double phi(int l, int s, int s_prime) const { return b_(Index(l) * m_ + s_prime, s); }
  double& phi(int l, int s, int s_prime) { return b_(Index(l) * m_ + s_prime, s); }

  std::vector<Matrix> to_phis() const {
    std::vector<Matrix> phis(p_);
    for (int l = 0; l < p_; ++l) phis[l] = b_.middleRows(Index(l) * m_, m_).transpose();
    return phis;
  }

  /// Number of parameters q = p * m^2.
  Index size() const { return b_.size(); }

  /// Linear index into vec(B) (column-major) for (l, s, s').
  Index vec_index(int l, int s, int s_prime) const {
    return Index(s) * (Index(p_) * m_) + Index(l) * m_ + s_prime;
  }

  Index support_size() const {
    Index n = 0;
    for (Index j = 0; j < b_.size(); ++j)
      if (b_(j) != 0.0) ++n;
    return n;
  }

 private:
  int p_;
  int m_;
  Matrix b_;
};

/// Stacked least-squares form of the VAR: response row r is the observation
/// at time T-r, design row r concatenates the p preceding observations,
/// most recent lag first. N = T - p rows.
struct LaggedRegression {
  Matrix response;  // N x m
  Matrix design;    // N x (p*m)
  int p = 0;
  int m = 0;

  Index n_obs() const { return response.rows(); }
};

inline Matrix companion_matrix(const VarModel& model) {
  const int p = model.order();
  const Index m = model.dim();
  Matrix comp = Matrix::Zero(Index(p) * m, Index(p) * m);
  for (int l = 0; l < p; ++l) comp.block(0, Index(l) * m, m, m) = model.phis()[l];
  for (int l = 1; l < p; ++l)
    comp.block(Index(l) * m, Index(l - 1) * m, m, m) = Matrix::Identity(m, m);
  return comp;
}

inline double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("spectral_radius: matrix not square");
  if (!a.allFinite()) throw DataError("spectral_radius: non-finite entry");
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline constexpr double kStationarityMargin = 1e-8;

inline bool is_stationary(const VarModel& model) {
  return spectral_radius(companion_matrix(model)) < 1.0 - kStationarityMargin;
}

/// Simulate t_len observations after discarding burn_in steps, starting from
/// a zero state. Deterministic for a fixed seed.
inline Panel simulate(const VarModel& model, Index t_len, Index burn_in, std::uint64_t seed) {
  if (t_len < 1) throw DimensionError("simulate: t_len must be >= 1");
  if (burn_in < 0) throw DimensionError("simulate: burn_in must be >= 0");
  if (!is_stationary(model)) throw DataError("simulate: model is not stationary");

  Eigen::LLT<Matrix> llt(model.sigma());
  if (llt.info() != Eigen::Success) throw NumericalError("simulate: Cholesky of sigma failed");
  const Matrix chol = llt.matrixL();

  const int p = model.order();
  const Index m = model.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Ring of the p most recent states, index (step % p).
  Matrix recent = Matrix::Zero(p, m);
  Matrix out(t_len, m);
  Vector z(m), x(m);
  const Index total = burn_in + t_len;
  for (Index step = 0; step < total; ++step) {
    for (Index i = 0; i < m; ++i) z(i) = gauss(rng);
    x = chol * z;
    for (int l = 0; l < p; ++l) {
      if (step - 1 - l < 0) continue;  // zero initial state
      x.noalias() += model.phis()[l] * recent.row(((step - 1 - l) % p)).transpose();
    }
    recent.row(step % p) = x.transpose();
    if (step >= burn_in) out.row(step - burn_in) = x.transpose();
  }
  return Panel{std::move(out)};
}

inline LaggedRegression build_design(const Panel& panel, int p) {
  const Index t_len = panel.t_len();
  const Index m = panel.sites();
  if (p < 1) throw DimensionError("build_design: p must be >= 1");
  if (t_len <= p) throw DataError("build_design: need at least p+1 observations");
  if (!panel.values.allFinite()) throw DataError("build_design: non-finite panel entry");

  const Index n = t_len - p;
  LaggedRegression reg;
  reg.p = p;
  reg.m = static_cast<int>(m);
  reg.response.resize(n, m);
  reg.design.resize(n, Index(p) * m);
  for (Index r = 0; r < n; ++r) {
    const Index t = t_len - 1 - r;  // response time (0-based)
    reg.response.row(r) = panel.values.row(t);
    for (int l = 1; l <= p; ++l)
      reg.design.block(r, Index(l - 1) * m, 1, m) = panel.values.row(t - l);
  }
  return reg;
}

/// One-step-ahead forecast of the row at position t of `values`, conditioning
/// on rows t-1 .. t-p. This is the single arithmetic path used by both
/// multi-step forecasting and rolling cross-validation.
inline Vector one_step_forecast(const CoefficientStack& coeffs, const Matrix& values, Index t) {
  const int p = coeffs.order();
  const Index m = coeffs.dim();
  if (values.cols() != m) throw DimensionError("one_step_forecast: site count mismatch");
  if (t < p) throw DimensionError("one_step_forecast: insufficient history");
  // Lags stacked most recent first, mirroring the design-row layout.
  Vector lags(Index(p) * m);
  for (int l = 1; l <= p; ++l) lags.segment(Index(l - 1) * m, m) = values.row(t - l);
  return coeffs.matrix().transpose() * lags;
}

/// Recursive plug-in forecasts for horizons 1..h from the end of `history`;
/// later steps substitute earlier forecasts for unobserved values.
inline std::vector<Vector> forecast(const CoefficientStack& coeffs, const Panel& history, int h) {
  const int p = coeffs.order();
  const Index m = coeffs.dim();
  if (h < 1) throw DimensionError("forecast: horizon must be >= 1");
  if (history.t_len() < p) throw DataError("forecast: history shorter than lag order");
  if (history.sites() != m) throw DimensionError("forecast: site count mismatch");

  Matrix extended(p + h, m);
  extended.topRows(p) = history.values.bottomRows(p);
  std::vector<Vector> out;
  out.reserve(h);
  for (int step = 0; step < h; ++step) {
    Vector x = one_step_forecast(coeffs, extended, p + step);
    extended.row(p + step) = x.transpose();
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace stvar
