// Independent reference implementations used only by tests. These must not
// share arithmetic paths with the library: the weighted solver here works on
// the original (unrescaled) problem via proximal gradient steps, and the
// characteristic-polynomial roots come from a scalar companion matrix.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "stvar/common.hpp"

namespace oracle {

using stvar::Index;
using stvar::Matrix;
using stvar::Vector;

inline double soft(double z, double t) {
  if (std::abs(z) <= t) return 0.0;
  return z > 0.0 ? z - t : z + t;
}

/// Worst KKT violation of the weighted lasso
///   (1/N) ||y - X b||^2 + lambda * sum_j w_j |b_j|
/// at the point b.
inline double weighted_kkt_residual(const Matrix& x, const Vector& y, const Vector& w,
                                    double lambda, const Vector& b) {
  const double n = static_cast<double>(x.rows());
  const Vector grad = 2.0 / n * (x.transpose() * (y - x * b));
  double worst = 0.0;
  for (Index j = 0; j < b.size(); ++j) {
    double v;
    if (b(j) != 0.0)
      v = std::abs(grad(j) - lambda * w(j) * (b(j) > 0.0 ? 1.0 : -1.0));
    else
      v = std::max(0.0, std::abs(grad(j)) - lambda * w(j));
    worst = std::max(worst, v);
  }
  return worst;
}

/// FISTA with function-value restarts on the weighted problem, run until the
/// KKT residual drops below `tol`. Solves the problem directly; no weight
/// rescaling is involved.
inline Vector weighted_prox_gradient(const Matrix& x, const Vector& y, const Vector& w,
                                     double lambda, double tol = 1e-10,
                                     long max_iters = 2000000) {
  const double n = static_cast<double>(x.rows());
  const Matrix gram = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const double lipschitz = 2.0 / n * es.eigenvalues().maxCoeff();
  if (!(lipschitz > 0.0)) return Vector::Zero(x.cols());
  const double step = 1.0 / lipschitz;

  Vector b = Vector::Zero(x.cols());
  Vector z = b;
  double t = 1.0;
  double prev_obj = std::numeric_limits<double>::infinity();
  const Vector xty = x.transpose() * y;
  for (long it = 0; it < max_iters; ++it) {
    const Vector grad = 2.0 / n * (gram * z - xty);
    Vector next(b.size());
    for (Index j = 0; j < b.size(); ++j)
      next(j) = soft(z(j) - step * grad(j), step * lambda * w(j));
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + (t - 1.0) / t_next * (next - b);
    b = next;
    t = t_next;
    if (it % 50 == 49) {
      const double obj =
          (y - x * b).squaredNorm() / n + lambda * w.cwiseProduct(b.cwiseAbs()).sum();
      if (obj > prev_obj) {  // momentum overshoot: restart
        z = b;
        t = 1.0;
      }
      prev_obj = obj;
      if (weighted_kkt_residual(x, y, w, lambda, b) <= tol) break;
    }
  }
  return b;
}

/// Roots of c_0 + c_1 z + ... + c_D z^D via the scalar companion matrix.
inline std::vector<std::complex<double>> polynomial_roots(std::vector<double> coeffs) {
  while (coeffs.size() > 1 && coeffs.back() == 0.0) coeffs.pop_back();
  const Index degree = static_cast<Index>(coeffs.size()) - 1;
  if (degree < 1) return {};
  Matrix comp = Matrix::Zero(degree, degree);
  for (Index i = 0; i < degree; ++i) comp(0, i) = -coeffs[degree - 1 - i] / coeffs[degree];
  for (Index i = 1; i < degree; ++i) comp(i, i - 1) = 1.0;
  Eigen::EigenSolver<Matrix> es(comp);
  std::vector<std::complex<double>> roots(degree);
  for (Index i = 0; i < degree; ++i) roots[i] = es.eigenvalues()(i);
  return roots;
}

/// Coefficients of det(I - sum_l Phi_l z^l) for m = 1 or m = 2, expanded by
/// hand over the polynomial entries.
inline std::vector<double> char_poly_coeffs(const std::vector<Matrix>& phis) {
  const Index m = phis.front().rows();
  const int p = static_cast<int>(phis.size());
  auto entry_poly = [&](Index r, Index c) {
    std::vector<double> poly(p + 1, 0.0);
    poly[0] = r == c ? 1.0 : 0.0;
    for (int l = 0; l < p; ++l) poly[l + 1] = -phis[l](r, c);
    return poly;
  };
  auto mul = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
  };
  if (m == 1) return entry_poly(0, 0);
  if (m == 2) {
    const auto ad = mul(entry_poly(0, 0), entry_poly(1, 1));
    const auto bc = mul(entry_poly(0, 1), entry_poly(1, 0));
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < ad.size(); ++i) out[i] = ad[i] - bc[i];
    return out;
  }
  throw std::invalid_argument("char_poly_coeffs: only m <= 2 supported");
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = scale * gauss(rng);
  return out;
}

inline Matrix random_symmetric(Index m, std::mt19937_64& rng, double scale = 1.0) {
  Matrix a = random_matrix(m, m, rng, scale);
  return (a + a.transpose()) / 2.0;
}

/// Random symmetric matrix rescaled to the requested spectral radius.
inline Matrix random_symmetric_with_radius(Index m, double radius, std::mt19937_64& rng) {
  Matrix a = random_symmetric(m, rng);
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
  return a * (radius / rho);
}

}  // namespace oracle
