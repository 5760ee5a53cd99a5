#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "stvar/common.hpp"
#include "stvar/var_model.hpp"

namespace stvar {

struct EstimationErrors {
  double l1 = 0.0;
  double l2 = 0.0;
};

inline EstimationErrors estimation_errors(const CoefficientStack& est,
                                          const CoefficientStack& truth) {
  if (est.order() != truth.order() || est.dim() != truth.dim())
    throw DimensionError("estimation_errors: shape mismatch");
  const Matrix delta = est.matrix() - truth.matrix();
  return {delta.cwiseAbs().sum(), delta.norm()};
}

struct SupportMetrics {
  double pfz = 0.0;   // fraction of truly-nonzero entries estimated as zero
  double pfnz = 0.0;  // fraction of truly-zero entries estimated as nonzero
};

inline SupportMetrics support_metrics(const CoefficientStack& est,
                                      const CoefficientStack& truth) {
  if (est.order() != truth.order() || est.dim() != truth.dim())
    throw DimensionError("support_metrics: shape mismatch");
  Index false_zero = 0, false_nonzero = 0;
  for (Index j = 0; j < est.size(); ++j) {
    const bool e = est.matrix()(j) != 0.0;
    const bool t = truth.matrix()(j) != 0.0;
    if (!e && t) ++false_zero;
    if (e && !t) ++false_nonzero;
  }
  const double q = static_cast<double>(est.size());
  return {static_cast<double>(false_zero) / q, static_cast<double>(false_nonzero) / q};
}

enum class EdgeClass {
  kTruePositive,   // both nonzero (black)
  kFalseNegative,  // truth nonzero, estimate zero (red)
  kFalsePositive,  // truth zero, estimate nonzero (blue)
  kTrueNegative,
};

inline const char* to_string(EdgeClass c) {
  switch (c) {
    case EdgeClass::kTruePositive: return "true-positive";
    case EdgeClass::kFalseNegative: return "false-negative";
    case EdgeClass::kFalsePositive: return "false-positive";
    case EdgeClass::kTrueNegative: return "true-negative";
  }
  return "?";
}

/// Per (lag, from, to) classification; `lags == 1` with `aggregated == true`
/// means an edge exists when any lag entry is nonzero.
struct EdgeClassification {
  int p = 0;
  int m = 0;
  bool aggregated = false;
  std::vector<EdgeClass> classes;  // indexed (l*m + s)*m + s'

  EdgeClass at(int l, int s, int s_prime) const {
    return classes[(static_cast<std::size_t>(l) * m + s) * m + s_prime];
  }
};

namespace detail {

inline EdgeClass classify_pair(bool est_nonzero, bool truth_nonzero) {
  if (truth_nonzero) return est_nonzero ? EdgeClass::kTruePositive : EdgeClass::kFalseNegative;
  return est_nonzero ? EdgeClass::kFalsePositive : EdgeClass::kTrueNegative;
}

}  // namespace detail

inline EdgeClassification classify_network(const CoefficientStack& est,
                                           const CoefficientStack& truth) {
  if (est.order() != truth.order() || est.dim() != truth.dim())
    throw DimensionError("classify_network: shape mismatch");
  EdgeClassification out;
  out.p = est.order();
  out.m = est.dim();
  out.classes.reserve(static_cast<std::size_t>(est.size()));
  for (int l = 0; l < out.p; ++l)
    for (int s = 0; s < out.m; ++s)
      for (int sp = 0; sp < out.m; ++sp)
        out.classes.push_back(
            detail::classify_pair(est.phi(l, s, sp) != 0.0, truth.phi(l, s, sp) != 0.0));
  return out;
}

/// Collapse lags: an edge s' -> s exists when any lag entry is nonzero.
inline EdgeClassification classify_network_any_lag(const CoefficientStack& est,
                                                   const CoefficientStack& truth) {
  if (est.order() != truth.order() || est.dim() != truth.dim())
    throw DimensionError("classify_network_any_lag: shape mismatch");
  EdgeClassification out;
  out.p = 1;
  out.m = est.dim();
  out.aggregated = true;
  out.classes.reserve(static_cast<std::size_t>(out.m) * out.m);
  for (int s = 0; s < out.m; ++s) {
    for (int sp = 0; sp < out.m; ++sp) {
      bool e = false, t = false;
      for (int l = 0; l < est.order(); ++l) {
        e = e || est.phi(l, s, sp) != 0.0;
        t = t || truth.phi(l, s, sp) != 0.0;
      }
      out.classes.push_back(detail::classify_pair(e, t));
    }
  }
  return out;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct DmTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
};

/// Diebold-Mariano test on squared-error loss. The long-run variance uses
/// rectangular truncation at lag h-1; a non-positive variance estimate is
/// reported as degenerate with no rejection.
inline DmTestResult dm_test(const std::vector<double>& err_a, const std::vector<double>& err_b,
                            int h) {
  if (err_a.size() != err_b.size()) throw DimensionError("dm_test: length mismatch");
  const std::size_t n = err_a.size();
  if (n < 2) throw DimensionError("dm_test: need at least two observations");
  if (h < 1) throw DimensionError("dm_test: horizon must be >= 1");

  std::vector<double> d(n);
  for (std::size_t t = 0; t < n; ++t) d[t] = err_a[t] * err_a[t] - err_b[t] * err_b[t];
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(n);

  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = lag; t < n; ++t) acc += (d[t] - mean) * (d[t - lag] - mean);
    return acc / static_cast<double>(n);
  };
  double lrv = autocov(0);
  for (int j = 1; j < h && static_cast<std::size_t>(j) < n; ++j) lrv += 2.0 * autocov(j);

  if (!(lrv > 0.0)) return {0.0, 1.0, true};
  const double stat = mean / std::sqrt(lrv / static_cast<double>(n));
  return {stat, 2.0 * normal_cdf(-std::abs(stat)), false};
}

struct MuExtrema {
  double mu_min = 0.0;
  double mu_max = 0.0;
};

/// Extremal eigenvalues of Phi(z)^H Phi(z) with Phi(z) = I - sum_l Phi_l z^l,
/// scanned over a uniform grid on the unit circle.
inline MuExtrema mu_extrema_numeric(const std::vector<Matrix>& phis, int grid_points = 720) {
  if (phis.empty()) throw DimensionError("mu_extrema_numeric: no lag matrices");
  if (grid_points < 8) throw DimensionError("mu_extrema_numeric: need at least 8 grid points");
  const Index m = phis.front().rows();
  using CMatrix = Eigen::MatrixXcd;
  MuExtrema out{std::numeric_limits<double>::infinity(), 0.0};
  CMatrix poly(m, m);
  for (int k = 0; k < grid_points; ++k) {
    const double theta = 2.0 * M_PI * k / grid_points;
    const std::complex<double> z(std::cos(theta), std::sin(theta));
    poly = CMatrix::Identity(m, m);
    std::complex<double> zl(1.0, 0.0);
    for (const Matrix& phi : phis) {
      zl *= z;
      poly -= phi.cast<std::complex<double>>() * zl;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(poly.adjoint() * poly);
    out.mu_min = std::min(out.mu_min, es.eigenvalues().minCoeff());
    out.mu_max = std::max(out.mu_max, es.eigenvalues().maxCoeff());
  }
  return out;
}

/// Stationarity/curvature constants controlling the error bounds. The
/// universal constants a1, a2 are unspecified upstream; they default to 1 and
/// every quantity involving them is an up-to-constants value.
struct TheoryQuantities {
  double rho = 0.0;
  double mu_min = 0.0;
  double mu_max = 0.0;
  double mu_min_tilde = 0.0;
  double alpha = 0.0;
  double omega = 0.0;
  double tau = 0.0;
  double q_const = 0.0;
  double a1 = 1.0;
  double a2 = 1.0;
};

namespace detail {

inline TheoryQuantities assemble_theory(double rho, double mu_min, double mu_max,
                                        double mu_min_tilde, const Matrix& sigma, int p, int m,
                                        Index n_obs, double a1, double a2) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  const double sig_min = es.eigenvalues().minCoeff();
  const double sig_max = es.eigenvalues().maxCoeff();
  if (sig_min <= 0.0) throw DataError("theory quantities: sigma not positive definite");

  TheoryQuantities q;
  q.rho = rho;
  q.mu_min = mu_min;
  q.mu_max = mu_max;
  q.mu_min_tilde = mu_min_tilde;
  q.a1 = a1;
  q.a2 = a2;
  q.alpha = sig_min / (2.0 * mu_max);
  q.omega = a1 * (sig_max / mu_min_tilde) / (sig_min / mu_max);
  q.tau = q.alpha * std::max(q.omega * q.omega, 1.0) * (std::log(double(p)) + std::log(double(m))) /
          static_cast<double>(n_obs);
  q.q_const = a2 * (sig_max + sig_max / mu_min + sig_max * mu_max / mu_min);
  return q;
}

}  // namespace detail

/// Closed-form constants for a symmetric stationary VAR(1) transition matrix:
/// mu_max = (1 + rho)^2, mu_min = (1 - rho)^2, and the companion polynomial
/// shares mu_min.
inline TheoryQuantities theory_symmetric_var1(const Matrix& phi, const Matrix& sigma, Index n_obs,
                                              double a1 = 1.0, double a2 = 1.0) {
  if (phi.rows() != phi.cols()) throw DimensionError("theory_symmetric_var1: phi not square");
  if ((phi - phi.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw DataError("theory_symmetric_var1: phi not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(phi);
  const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
  if (rho >= 1.0) throw DataError("theory_symmetric_var1: process not stationary");
  const double mu_max = (1.0 + rho) * (1.0 + rho);
  const double mu_min = (1.0 - rho) * (1.0 - rho);
  return detail::assemble_theory(rho, mu_min, mu_max, mu_min, sigma, 1,
                                 static_cast<int>(phi.rows()), n_obs, a1, a2);
}

/// Grid-based evaluation of the same constants for a general stationary model.
inline TheoryQuantities theory_numeric(const VarModel& model, Index n_obs, int grid_points = 720,
                                       double a1 = 1.0, double a2 = 1.0) {
  const Matrix comp = companion_matrix(model);
  const double rho = spectral_radius(comp);
  if (rho >= 1.0) throw DataError("theory_numeric: process not stationary");
  const MuExtrema mu = mu_extrema_numeric(model.phis(), grid_points);
  const MuExtrema mu_tilde = mu_extrema_numeric({comp}, grid_points);
  return detail::assemble_theory(rho, mu.mu_min, mu.mu_max, mu_tilde.mu_min, model.sigma(),
                                 model.order(), model.dim(), n_obs, a1, a2);
}

struct ExactSparsityBounds {
  double l2 = 0.0;
  double l1 = 0.0;
  double prediction = 0.0;
  double false_zeros = 0.0;
  double false_nonzeros = 0.0;  // for the lambda-thresholded estimator
};

inline ExactSparsityBounds exact_sparsity_bounds(double k, double lambda_n, double alpha, double r_w,
                                      double s0) {
  if (!(alpha > 0.0)) throw DataError("exact_sparsity_bounds: alpha must be positive");
  ExactSparsityBounds b;
  // l1 and prediction factor through l2; keeping that structure makes the
  // weak-sparsity bounds reduce to these values exactly when the tail is 0.
  b.l2 = (1.0 + 2.0 * r_w) * std::sqrt(k) * lambda_n / alpha;
  b.l1 = (2.0 + 2.0 * r_w) * std::sqrt(k) * b.l2;  // = (2+6r+4r^2) k lambda / alpha
  b.prediction = (1.0 + 2.0 * r_w) / 2.0 * std::sqrt(k) * lambda_n * b.l2;
  b.false_zeros = b.l1 / s0;
  b.false_nonzeros = (1.0 + 2.0 * r_w) * (1.0 + 2.0 * r_w) * k / alpha;
  return b;
}

struct WeakSparsityBounds {
  double l2 = 0.0;
  double l1 = 0.0;
  double prediction = 0.0;
};

/// Weak-sparsity error bounds; with tail_l1 = 0 these reduce exactly to the
/// exact-sparsity bounds above.
inline WeakSparsityBounds weak_sparsity_bounds(double j_eta, double tail_l1, double lambda_tilde,
                                      double alpha, double r_w, double omega, double q_const) {
  if (!(alpha > 0.0)) throw DataError("weak_sparsity_bounds: alpha must be positive");
  WeakSparsityBounds b;
  b.l2 = (1.0 + 2.0 * r_w) * std::sqrt(j_eta) * lambda_tilde / alpha +
         2.0 * std::sqrt(r_w * lambda_tilde * tail_l1 / alpha) +
         4.0 * r_w * std::max(omega, 1.0) / q_const * lambda_tilde * tail_l1;
  b.l1 = (2.0 + 2.0 * r_w) * std::sqrt(j_eta) * b.l2 + 4.0 * r_w * tail_l1;
  b.prediction = (1.0 + 2.0 * r_w) / 2.0 * std::sqrt(j_eta) * lambda_tilde * b.l2 +
                 2.0 * r_w * lambda_tilde * tail_l1;
  return b;
}

struct SparsityProfilePoint {
  double eta = 0.0;
  Index j_eta = 0;      // entries with |beta*| > eta
  double tail_l1 = 0.0;  // sum of |beta*| over entries <= eta
};

inline std::vector<SparsityProfilePoint> weak_sparsity_profile(const CoefficientStack& truth,
                                                               const std::vector<double>& etas) {
  std::vector<SparsityProfilePoint> out;
  out.reserve(etas.size());
  for (double eta : etas) {
    if (eta < 0.0) throw DataError("weak_sparsity_profile: eta must be nonnegative");
    SparsityProfilePoint pt;
    pt.eta = eta;
    for (Index j = 0; j < truth.size(); ++j) {
      const double v = std::abs(truth.matrix()(j));
      if (v > eta)
        ++pt.j_eta;
      else
        pt.tail_l1 += v;
    }
    out.push_back(pt);
  }
  return out;
}

/// lr-ball radius sum_j |beta*_j|^r for r in (0, 1]; r = 0 counts nonzeros.
inline double lr_ball_radius(const CoefficientStack& truth, double r) {
  if (r < 0.0 || r > 1.0) throw DataError("lr_ball_radius: r must lie in [0, 1]");
  double acc = 0.0;
  for (Index j = 0; j < truth.size(); ++j) {
    const double v = std::abs(truth.matrix()(j));
    if (r == 0.0)
      acc += v != 0.0 ? 1.0 : 0.0;
    else if (v != 0.0)
      acc += std::pow(v, r);
  }
  return acc;
}

/// l2 error bound under the lr-ball constraint with radius R; w1 and w2 are
/// the smallest and largest penalty weights.
inline double lr_ball_bound(double w1, double w2, double r, double radius, double lambda_n,
                               double alpha, double omega, double q_const) {
  if (!(alpha > 0.0)) throw DataError("lr_ball_bound: alpha must be positive");
  const double first = (w1 + 2.0 * w2 + 2.0 * std::sqrt(w2)) * std::pow(alpha, (r - 2.0) / 2.0) *
                       std::sqrt(radius) * std::pow(lambda_n, (2.0 - r) / 2.0);
  const double second = 4.0 * w2 * std::max(omega, 1.0) / q_const * std::pow(alpha, r - 1.0) *
                        radius * std::pow(lambda_n, 2.0 - r);
  return first + second;
}

}  // namespace stvar
