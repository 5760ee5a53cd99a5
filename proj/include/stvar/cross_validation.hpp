#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "stvar/common.hpp"
#include "stvar/parallel.hpp"
#include "stvar/solver.hpp"
#include "stvar/var_model.hpp"
#include "stvar/weights.hpp"

namespace stvar {

/// Forward cross-validation plan over (p, c, lambda) triples.
struct CvPlan {
  Index train_end = 0;  // 0 selects floor(0.6 * T)
  std::vector<int> p_candidates{1, 2, 3, 4};
  std::vector<double> c_candidates{0.5, 5, 10, 15, 20, 25, 30};
  int lambda_count = 30;
  double lambda_ratio = 1000.0;
  WeightKind kind = WeightKind::kExpLagDist;
  SolverOptions solver;
  int threads = 1;
};

struct CvEntry {
  int p = 0;
  double c = 0.0;
  double lambda = 0.0;
  double rmsfe = 0.0;
};

struct CvResult {
  std::vector<CvEntry> table;
  int p_opt = 0;
  double c_opt = 0.0;
  double lambda_opt = 0.0;
  double rmsfe_opt = 0.0;
  FitResult refit;
  bool degenerate = false;  // lambda_max was zero everywhere (e.g. all-zero panel)

  CvResult(int p, int m) : refit(p, m) {}
};

/// Root mean squared forecast error over H steps, averaged across sites:
/// sqrt((1/H) sum_t (1/m) ||forecast_t - actual_t||^2).
inline double rmsfe(const std::vector<Vector>& forecasts, const std::vector<Vector>& actuals) {
  if (forecasts.size() != actuals.size())
    throw DimensionError("rmsfe: forecast/actual length mismatch");
  if (forecasts.empty()) throw DimensionError("rmsfe: need at least one step");
  double total = 0.0;
  for (std::size_t t = 0; t < forecasts.size(); ++t) {
    if (forecasts[t].size() != actuals[t].size())
      throw DimensionError("rmsfe: vector length mismatch");
    total += (forecasts[t] - actuals[t]).squaredNorm() / static_cast<double>(forecasts[t].size());
  }
  return std::sqrt(total / static_cast<double>(forecasts.size()));
}

namespace detail {

/// Rolling one-step forecasts of rows [t_start, T) of `values`, conditioning
/// on realized history only; coefficients stay fixed.
inline std::vector<Vector> rolling_one_step(const CoefficientStack& coeffs, const Matrix& values,
                                            Index t_start) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(values.rows() - t_start));
  for (Index t = t_start; t < values.rows(); ++t)
    out.push_back(one_step_forecast(coeffs, values, t));
  return out;
}

}  // namespace detail

/// Grid search over (p, c, lambda): fit paths on the training window, score
/// rolling one-step forecasts on the validation window, pick the minimizer,
/// refit on the full panel. Ties prefer larger lambda, then smaller p, then
/// smaller c.
inline CvResult forward_cv(const Panel& panel, const SiteGeometry& geometry, const CvPlan& plan) {
  const Index t_len = panel.t_len();
  const Index m = panel.sites();
  if (plan.p_candidates.empty() || plan.c_candidates.empty())
    throw DimensionError("forward_cv: empty candidate set");
  const Index t0 = plan.train_end > 0 ? plan.train_end : (6 * t_len) / 10;
  const int p_max = *std::max_element(plan.p_candidates.begin(), plan.p_candidates.end());
  if (t0 <= p_max) throw DataError("forward_cv: training window shorter than max lag order");
  if (t_len < t0 + 1) throw DataError("forward_cv: no validation data after train_end");
  if (geometry.sites() != m) throw DimensionError("forward_cv: geometry/panel site mismatch");

  const Panel train{panel.values.topRows(t0)};
  std::vector<Vector> actuals;
  actuals.reserve(static_cast<std::size_t>(t_len - t0));
  for (Index t = t0; t < t_len; ++t) actuals.push_back(panel.values.row(t).transpose());

  struct PairResult {
    std::vector<CvEntry> entries;
    bool degenerate = false;
  };
  const std::size_t n_pairs = plan.p_candidates.size() * plan.c_candidates.size();
  std::vector<PairResult> pair_results(n_pairs);

  parallel_for(n_pairs, plan.threads, [&](std::size_t idx) {
    const int p = plan.p_candidates[idx / plan.c_candidates.size()];
    const double c = plan.c_candidates[idx % plan.c_candidates.size()];
    const PenaltyWeights weights = weight_tensor({plan.kind, c}, geometry, p);
    const LaggedRegression reg = build_design(train, p);
    PairResult& pr = pair_results[idx];

    const bool zero_design = reg.design.cwiseAbs().maxCoeff() == 0.0;
    const double lmax = zero_design ? 0.0 : lambda_max(reg, weights);
    if (lmax <= 0.0) {
      // Nothing correlates with the response; every lambda gives the zero fit.
      pr.degenerate = true;
      const CoefficientStack zero(p, static_cast<int>(m));
      std::vector<Vector> fc = detail::rolling_one_step(zero, panel.values, t0);
      const double score = rmsfe(fc, actuals);
      pr.entries.assign(plan.lambda_count, CvEntry{p, c, 0.0, score});
      return;
    }
    const LambdaGrid grid = lambda_grid(lmax, plan.lambda_count, plan.lambda_ratio);
    const std::vector<FitResult> path = fit_path(reg, weights, grid, plan.solver);
    pr.entries.reserve(path.size());
    for (const FitResult& fitres : path) {
      std::vector<Vector> fc = detail::rolling_one_step(fitres.coeffs, panel.values, t0);
      pr.entries.push_back(CvEntry{p, c, fitres.lambda, rmsfe(fc, actuals)});
    }
  });

  CvResult result(plan.p_candidates.front(), static_cast<int>(m));
  bool any_nondegenerate = false;
  for (const PairResult& pr : pair_results) {
    if (!pr.degenerate) any_nondegenerate = true;
    result.table.insert(result.table.end(), pr.entries.begin(), pr.entries.end());
  }
  result.degenerate = !any_nondegenerate;

  const CvEntry* best = nullptr;
  for (const CvEntry& entry : result.table) {
    if (best == nullptr || entry.rmsfe < best->rmsfe) {
      best = &entry;
    } else if (entry.rmsfe == best->rmsfe) {
      // Most parsimonious tie-break.
      if (entry.lambda > best->lambda ||
          (entry.lambda == best->lambda &&
           (entry.p < best->p || (entry.p == best->p && entry.c < best->c))))
        best = &entry;
    }
  }
  result.p_opt = best->p;
  result.c_opt = best->c;
  result.lambda_opt = best->lambda;
  result.rmsfe_opt = best->rmsfe;

  const PenaltyWeights weights = weight_tensor({plan.kind, result.c_opt}, geometry, result.p_opt);
  const LaggedRegression full = build_design(panel, result.p_opt);
  result.refit = fit(full, weights, result.lambda_opt, std::nullopt, plan.solver);
  return result;
}

}  // namespace stvar
