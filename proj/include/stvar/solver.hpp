#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "stvar/common.hpp"
#include "stvar/parallel.hpp"
#include "stvar/var_model.hpp"
#include "stvar/weights.hpp"

namespace stvar {

struct SolverOptions {
  double tol_cd = 1e-7;    // relative coefficient-change tolerance per sweep
  int max_sweeps = 100000;
  double tol_kkt = 1e-6;
  bool track_objective = false;
  int threads = 1;
};

/// Result of a single weighted fit. `support` lists vec(B) indices of the
/// exact nonzeros; `converged` requires both the sweep criterion and the
/// KKT certificate at tol_kkt.
struct FitResult {
  CoefficientStack coeffs;
  double lambda = 0.0;
  double objective = 0.0;
  std::vector<int> sweeps;          // per response column
  std::vector<char> converged;      // per response column
  bool all_converged = false;
  std::vector<Index> support;       // vec(B) indices of nonzeros
  std::vector<std::vector<double>> objective_trace;  // per column, if tracked

  FitResult(int p, int m) : coeffs(p, m) {}
};

/// Strictly decreasing geometric grid from lmax down to lmax / ratio.
struct LambdaGrid {
  std::vector<double> values;
};

inline LambdaGrid lambda_grid(double lmax, int count = 30, double ratio = 1000.0) {
  if (!(lmax > 0.0)) throw DataError("lambda_grid: lambda_max must be positive");
  if (count < 2) throw DimensionError("lambda_grid: need at least two grid points");
  if (!(ratio > 1.0)) throw DataError("lambda_grid: ratio must exceed 1");
  LambdaGrid grid;
  grid.values.resize(count);
  for (int k = 0; k < count; ++k)
    grid.values[k] = lmax * std::pow(ratio, -static_cast<double>(k) / (count - 1));
  return grid;
}

inline double soft_threshold(double z, double threshold) {
  if (std::abs(z) <= threshold) return 0.0;  // boundary ties resolve to zero
  return z > 0.0 ? z - threshold : z + threshold;
}

/// Design columns of one response column's problem after dividing by the
/// penalty weights. Columns with infinite weight are removed; `kept` maps
/// back to original coefficient indices and `inv_weight` undoes the scaling.
struct RescaledColumn {
  Matrix design;            // N x n_kept
  std::vector<Index> kept;  // original coefficient index per kept column
  Vector inv_weight;        // 1 / w for kept columns
};

namespace detail {

/// Penalty weight attached to coefficient j of response column i:
/// j = l*m + s' addresses Phi_{l+1, i s'}.
inline double coefficient_weight(const PenaltyWeights& weights, Index m, Index i, Index j) {
  const Index l = j / m;
  const Index sp = j % m;
  return weights.w[static_cast<std::size_t>(l)](i, sp);
}

}  // namespace detail

inline RescaledColumn rescale_column_design(const LaggedRegression& reg,
                                            const PenaltyWeights& weights, Index response_col) {
  const Index q = reg.design.cols();
  const Index m = reg.m;
  if (weights.order() != reg.p || weights.dim() != m)
    throw DimensionError("rescale_column_design: weight tensor shape mismatch");
  if (response_col < 0 || response_col >= m)
    throw DimensionError("rescale_column_design: response column out of range");

  RescaledColumn out;
  out.kept.reserve(q);
  for (Index j = 0; j < q; ++j) {
    const double w = detail::coefficient_weight(weights, m, response_col, j);
    if (std::isinf(w)) continue;  // structurally zero coefficient
    if (!(w > 0.0) || std::isnan(w))
      throw DataError("rescale_column_design: weights must be strictly positive");
    out.kept.push_back(j);
  }
  const Index n_kept = static_cast<Index>(out.kept.size());
  out.design.resize(reg.design.rows(), n_kept);
  out.inv_weight.resize(n_kept);
  for (Index k = 0; k < n_kept; ++k) {
    const double w = detail::coefficient_weight(weights, m, response_col, out.kept[k]);
    out.inv_weight(k) = 1.0 / w;
    out.design.col(k) = reg.design.col(out.kept[k]) * out.inv_weight(k);
  }
  return out;
}

/// Smallest lambda at which the all-zero stack satisfies the subgradient
/// condition: max over columns and coefficients of (2/N)|X_j' Y_i| / w_j.
inline double lambda_max(const LaggedRegression& reg, const PenaltyWeights& weights) {
  const Index n = reg.n_obs();
  if (reg.design.cwiseAbs().maxCoeff() == 0.0)
    throw DataError("lambda_max: design matrix is identically zero");
  double lmax = 0.0;
  for (Index i = 0; i < reg.m; ++i) {
    const RescaledColumn rc = rescale_column_design(reg, weights, i);
    if (rc.design.cols() == 0) continue;
    const Vector corr = rc.design.transpose() * reg.response.col(i);
    lmax = std::max(lmax, 2.0 / static_cast<double>(n) * corr.cwiseAbs().maxCoeff());
  }
  return lmax;
}

namespace detail {

struct ColumnSolve {
  Vector beta;  // rescaled coefficients over kept columns
  int sweeps = 0;
  bool sweep_converged = false;
  double kkt_residual = 0.0;
  std::vector<double> objective_trace;
};

/// Cyclic coordinate descent for
///   (1/N) ||y - X b||^2 + lambda ||b||_1
/// with glmnet-style active-set iterations between full sweeps.
inline ColumnSolve solve_column(const Matrix& x, const Vector& y, double lambda, Vector beta,
                                const SolverOptions& opt) {
  const Index n = x.rows();
  const Index q = x.cols();
  ColumnSolve out;
  out.beta = std::move(beta);
  if (q == 0) {
    out.sweep_converged = true;
    return out;
  }

  Vector col_scale(q);  // z_j = (1/N) ||X_j||^2
  for (Index j = 0; j < q; ++j) col_scale(j) = x.col(j).squaredNorm() / static_cast<double>(n);
  Vector residual = y - x * out.beta;
  const double half_lambda = lambda / 2.0;

  auto update_coef = [&](Index j) -> double {
    if (col_scale(j) == 0.0) {
      // A zero column carries no signal; pin its coefficient.
      const double old = out.beta(j);
      if (old != 0.0) residual.noalias() += x.col(j) * old;
      out.beta(j) = 0.0;
      return std::abs(old);
    }
    const double old = out.beta(j);
    const double rho = x.col(j).dot(residual) / static_cast<double>(n) + col_scale(j) * old;
    const double next = soft_threshold(rho, half_lambda) / col_scale(j);
    if (next != old) {
      residual.noalias() -= x.col(j) * (next - old);
      out.beta(j) = next;
    }
    return std::abs(next - old);
  };

  auto record_objective = [&] {
    if (!opt.track_objective) return;
    const double obj = residual.squaredNorm() / static_cast<double>(n) +
                       lambda * out.beta.template lpNorm<1>();
    out.objective_trace.push_back(obj);
  };

  // KKT certificate on the rescaled problem: gradient g_j = (2/N) X_j' r.
  auto kkt_residual = [&] {
    double worst = 0.0;
    for (Index j = 0; j < q; ++j) {
      const double g = 2.0 * x.col(j).dot(residual) / static_cast<double>(n);
      double violation;
      if (out.beta(j) != 0.0) {
        violation = std::abs(g - lambda * (out.beta(j) > 0.0 ? 1.0 : -1.0));
      } else {
        violation = std::max(0.0, std::abs(g) - lambda);
      }
      worst = std::max(worst, violation);
    }
    return worst;
  };

  std::vector<Index> active;
  active.reserve(q);
  while (out.sweeps < opt.max_sweeps) {
    // Full sweep over every coordinate.
    double max_change = 0.0;
    for (Index j = 0; j < q; ++j) max_change = std::max(max_change, update_coef(j));
    ++out.sweeps;
    record_objective();
    const double scale = 1.0 + out.beta.cwiseAbs().maxCoeff();
    if (max_change < opt.tol_cd * scale) {
      // Sweep changes have settled; declare convergence only once the
      // certificate holds, otherwise keep sweeping.
      out.kkt_residual = kkt_residual();
      if (out.kkt_residual <= opt.tol_kkt) {
        out.sweep_converged = true;
        return out;
      }
      continue;
    }

    // Iterate on the current active set until it stabilizes, then re-check
    // everything with the next full sweep.
    active.clear();
    for (Index j = 0; j < q; ++j)
      if (out.beta(j) != 0.0) active.push_back(j);
    while (out.sweeps < opt.max_sweeps && !active.empty()) {
      double inner_change = 0.0;
      for (Index j : active) inner_change = std::max(inner_change, update_coef(j));
      ++out.sweeps;
      record_objective();
      const double inner_scale = 1.0 + out.beta.cwiseAbs().maxCoeff();
      if (inner_change < opt.tol_cd * inner_scale) break;
    }
  }
  out.kkt_residual = kkt_residual();
  return out;
}

}  // namespace detail

/// Weighted l1-regularized least squares,
///   min_B (1/N)||Y - X B||_F^2 + lambda * sum w_{l,ss'} |Phi_{l,ss'}|,
/// solved per response column on the weight-rescaled design. Columns are
/// independent and may be solved in parallel.
inline FitResult fit(const LaggedRegression& reg, const PenaltyWeights& weights, double lambda,
                     const std::optional<CoefficientStack>& init = std::nullopt,
                     const SolverOptions& opt = SolverOptions{}) {
  if (lambda < 0.0) throw DataError("fit: lambda must be nonnegative");
  if (!reg.design.allFinite() || !reg.response.allFinite())
    throw DataError("fit: non-finite entries in regression data");
  if (init && (init->order() != reg.p || init->dim() != reg.m))
    throw DimensionError("fit: warm start shape mismatch");

  const Index m = reg.m;
  FitResult result(reg.p, reg.m);
  result.lambda = lambda;
  result.sweeps.assign(m, 0);
  result.converged.assign(m, 0);
  if (opt.track_objective) result.objective_trace.resize(m);
  std::vector<double> column_objectives(m, 0.0);

  parallel_for(static_cast<std::size_t>(m), opt.threads, [&](std::size_t col) {
    const Index i = static_cast<Index>(col);
    const RescaledColumn rc = rescale_column_design(reg, weights, i);
    const Index n_kept = static_cast<Index>(rc.kept.size());
    Vector beta0 = Vector::Zero(n_kept);
    if (init) {
      for (Index k = 0; k < n_kept; ++k)
        beta0(k) = init->matrix()(rc.kept[k], i) / rc.inv_weight(k);
    }
    detail::ColumnSolve solve =
        detail::solve_column(rc.design, reg.response.col(i), lambda, std::move(beta0), opt);

    for (Index k = 0; k < n_kept; ++k)
      result.coeffs.matrix()(rc.kept[k], i) = solve.beta(k) * rc.inv_weight(k);
    result.sweeps[col] = solve.sweeps;
    result.converged[col] = solve.sweep_converged && solve.kkt_residual <= opt.tol_kkt;
    const Vector residual = reg.response.col(i) - rc.design * solve.beta;
    column_objectives[col] = residual.squaredNorm() / static_cast<double>(reg.n_obs()) +
                             lambda * solve.beta.template lpNorm<1>();
    if (opt.track_objective) result.objective_trace[col] = std::move(solve.objective_trace);
  });

  result.objective = std::accumulate(column_objectives.begin(), column_objectives.end(), 0.0);
  result.all_converged =
      std::all_of(result.converged.begin(), result.converged.end(), [](char c) { return c != 0; });
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < result.coeffs.matrix().rows(); ++j)
      if (result.coeffs.matrix()(j, i) != 0.0)
        result.support.push_back(i * result.coeffs.matrix().rows() + j);
  return result;
}

/// Fit along a descending grid, warm-starting each fit from its predecessor.
inline std::vector<FitResult> fit_path(const LaggedRegression& reg, const PenaltyWeights& weights,
                                       const LambdaGrid& grid,
                                       const SolverOptions& opt = SolverOptions{}) {
  if (grid.values.empty()) throw DataError("fit_path: empty lambda grid");
  for (std::size_t k = 1; k < grid.values.size(); ++k)
    if (!(grid.values[k] < grid.values[k - 1]))
      throw DataError("fit_path: grid must be strictly decreasing");

  std::vector<FitResult> path;
  path.reserve(grid.values.size());
  std::optional<CoefficientStack> warm;
  for (double lambda : grid.values) {
    FitResult res = fit(reg, weights, lambda, warm, opt);
    warm = res.coeffs;
    path.push_back(std::move(res));
  }
  return path;
}

/// Hard threshold: keep entries with |b| strictly above `level`.
inline CoefficientStack threshold(const CoefficientStack& coeffs, double level) {
  if (level < 0.0) throw DataError("threshold: level must be nonnegative");
  CoefficientStack out = coeffs;
  Matrix& b = out.matrix();
  for (Index j = 0; j < b.size(); ++j)
    if (std::abs(b(j)) <= level) b(j) = 0.0;
  return out;
}

}  // namespace stvar
