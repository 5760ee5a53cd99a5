#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stvar/common.hpp"
#include "stvar/cross_validation.hpp"
#include "stvar/evaluation.hpp"
#include "stvar/parallel.hpp"
#include "stvar/var_model.hpp"
#include "stvar/weights.hpp"

namespace stvar {

/// Simulation-study generator settings. Setting 2 (corner clusters) applies
/// to order 1 only; orders 2 and 3 sample sites uniformly.
struct ScenarioSpec {
  int order = 1;        // 1, 2 or 3
  int setting = 1;      // 1: uniform sites, 2: two corner clusters
  char scenario = 'a';  // a: exactly sparse, b: fast decay, c: slow decay
  int m = 100;
  double sigma_scale = 0.01;
  std::uint64_t seed = 0;
  int max_attempts = 10000;
  bool jitter = true;
};

/// 21 x 21 lattice with 0.05 spacing; each row/column index carries its own
/// uniform(-0.01, 0.01) jitter. Returns 441 coordinate pairs.
inline Matrix make_lattice(std::uint64_t seed, bool jitter = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-0.01, 0.01);
  constexpr int kSide = 21;
  Vector xs(kSide), ys(kSide);
  for (int i = 0; i < kSide; ++i) xs(i) = 0.05 * (i + 1) + (jitter ? unif(rng) : 0.0);
  for (int j = 0; j < kSide; ++j) ys(j) = 0.05 * (j + 1) + (jitter ? unif(rng) : 0.0);
  Matrix coords(kSide * kSide, 2);
  Index row = 0;
  for (int i = 0; i < kSide; ++i)
    for (int j = 0; j < kSide; ++j, ++row) coords.row(row) << xs(i), ys(j);
  return coords;
}

namespace detail {

inline std::vector<int> sample_without_replacement(std::vector<int> pool, int count,
                                                   std::mt19937_64& rng) {
  if (count > static_cast<int>(pool.size()))
    throw DataError("scenario: requested more sites than available");
  std::vector<int> picked;
  picked.reserve(count);
  for (int k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t idx = pick(rng);
    picked.push_back(pool[idx]);
    pool[idx] = pool.back();
    pool.pop_back();
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

struct LagRule {
  bool exact = false;
  double unif_lo = 0.0, unif_hi = 0.0;  // magnitude range (exact sparsity)
  double d0 = 0.0;                      // support cutoff (exact sparsity)
  double scale = 0.0, decay = 0.0;      // magnitude = scale * exp(-decay * d)
};

inline std::vector<LagRule> magnitude_rules(const ScenarioSpec& spec) {
  std::vector<LagRule> rules;
  auto exact = [](double lo, double hi, double d0) {
    LagRule r;
    r.exact = true;
    r.unif_lo = lo;
    r.unif_hi = hi;
    r.d0 = d0;
    return r;
  };
  auto decay = [](double scale, double rate) {
    LagRule r;
    r.scale = scale;
    r.decay = rate;
    return r;
  };
  switch (spec.order) {
    case 1: {
      const double d0 = spec.setting == 2 ? 0.06 : 0.05;
      if (spec.scenario == 'a') rules = {exact(0.1, 0.5, d0)};
      if (spec.scenario == 'b') rules = {decay(0.55, 20.0)};
      if (spec.scenario == 'c') rules = {decay(0.25, 5.0)};
      break;
    }
    case 2: {
      if (spec.scenario == 'a') rules = {exact(0.1, 0.6, 0.06), exact(0.1, 0.4, 0.04)};
      if (spec.scenario == 'b') rules = {decay(0.5, 20.0), decay(0.3, 80.0)};
      if (spec.scenario == 'c') rules = {decay(0.3, 5.0), decay(0.15, 20.0)};
      break;
    }
    case 3: {
      for (int l = 1; l <= 3; ++l) {
        if (spec.scenario == 'a') rules.push_back(exact(0.15, 0.6 - 0.1 * l, 0.07 - 0.01 * l));
        if (spec.scenario == 'b') rules.push_back(decay(0.3, 25.0 * l));
        if (spec.scenario == 'c') rules.push_back(decay(0.25, 10.0 * l));
      }
      break;
    }
    default:
      throw DataError("scenario: order must be 1, 2 or 3");
  }
  if (rules.empty()) throw DataError("scenario: scenario must be 'a', 'b' or 'c'");
  return rules;
}

}  // namespace detail

/// Draw site locations and a stationary truth model for the given scenario.
/// The transition matrices are redrawn until the companion spectral radius
/// is below one; sites stay fixed across attempts.
inline std::pair<SiteGeometry, VarModel> generate_truth(const ScenarioSpec& spec) {
  if (spec.setting != 1 && spec.setting != 2)
    throw DataError("scenario: setting must be 1 or 2");
  if (spec.order != 1 && spec.setting == 2)
    throw DataError("scenario: setting 2 is defined for order 1 only");
  std::mt19937_64 rng(spec.seed);
  const Matrix lattice = make_lattice(spec.seed, spec.jitter);

  std::vector<int> selected;
  if (spec.setting == 1) {
    std::vector<int> pool(lattice.rows());
    std::iota(pool.begin(), pool.end(), 0);
    selected = detail::sample_without_replacement(std::move(pool), spec.m, rng);
  } else {
    std::vector<int> lower, upper;
    for (Index v = 0; v < lattice.rows(); ++v) {
      if (lattice(v, 0) < 0.5 && lattice(v, 1) < 0.5) lower.push_back(static_cast<int>(v));
      if (lattice(v, 0) > 0.5 && lattice(v, 1) > 0.5) upper.push_back(static_cast<int>(v));
    }
    const int half = spec.m / 2;
    selected = detail::sample_without_replacement(std::move(lower), half, rng);
    std::vector<int> up = detail::sample_without_replacement(std::move(upper), spec.m - half, rng);
    selected.insert(selected.end(), up.begin(), up.end());
    std::sort(selected.begin(), selected.end());
  }

  Matrix coords(spec.m, 2);
  for (int s = 0; s < spec.m; ++s) coords.row(s) = lattice.row(selected[s]);
  SiteGeometry geometry = SiteGeometry::from_coords(coords);

  const std::vector<detail::LagRule> rules = detail::magnitude_rules(spec);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Matrix sigma = spec.sigma_scale * Matrix::Identity(spec.m, spec.m);

  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    std::vector<Matrix> phis;
    phis.reserve(rules.size());
    for (const detail::LagRule& rule : rules) {
      Matrix phi(spec.m, spec.m);
      for (Index s = 0; s < spec.m; ++s) {
        for (Index sp = 0; sp < spec.m; ++sp) {
          const double d = geometry.distance(s, sp);
          double mag;
          if (rule.exact) {
            mag = rule.unif_lo + (rule.unif_hi - rule.unif_lo) * unit(rng);
            if (d > rule.d0) mag = 0.0;
          } else {
            mag = rule.scale * std::exp(-rule.decay * d);
          }
          const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
          phi(s, sp) = sign * mag;
        }
      }
      phis.push_back(std::move(phi));
    }
    VarModel candidate(std::move(phis), sigma);
    if (is_stationary(candidate)) return {std::move(geometry), std::move(candidate)};
  }
  throw NumericalError("generate_truth: stationarity rejection budget exhausted");
}

/// One estimator entry in a study; the first configured estimator is the
/// ratio baseline (typically plain LASSO via c = 0).
struct EstimatorConfig {
  std::string name;
  WeightKind kind = WeightKind::kExpLagDist;
  std::vector<double> c_candidates{0.0};
};

struct StudyConfig {
  ScenarioSpec scenario;
  int replicates = 20;
  Index t_len = 150;
  Index train_end = 40;       // forward-CV split inside the fitting window
  Index validation_end = 70;  // fitting window; the rest is held-out test data
  Index burn_in = 500;
  std::vector<int> p_candidates{1, 2, 3, 4};
  int lambda_count = 30;
  double lambda_ratio = 1000.0;
  int horizons = 5;
  std::vector<EstimatorConfig> estimators;
  SolverOptions solver;
  int threads = 0;
};

struct ReplicateMetrics {
  int replicate = 0;
  std::string estimator;
  int p_opt = 0;
  double c_opt = 0.0;
  double lambda_opt = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double pfz = 0.0;
  double pfnz = 0.0;
  std::vector<double> rmsfe;  // horizons 1..H
};

struct RatioSummary {
  std::string estimator;
  std::string metric;
  double mean_ratio = 0.0;      // mean of per-replicate ratios (finite denominators)
  double se_ratio = 0.0;
  int used_replicates = 0;
  double ratio_of_means = 0.0;  // aggregate-count ratio, robust to zero denominators
};

struct StudyResult {
  std::vector<ReplicateMetrics> per_replicate;
  std::vector<RatioSummary> summary;
};

namespace detail {

/// Pad a stack with zero lag blocks so est/truth compare on a common order.
inline CoefficientStack pad_order(const CoefficientStack& stack, int p) {
  if (stack.order() == p) return stack;
  CoefficientStack out(p, stack.dim());
  out.matrix().topRows(stack.matrix().rows()) = stack.matrix();
  return out;
}

inline std::vector<double> test_rmsfe(const CoefficientStack& coeffs, const Matrix& values,
                                      Index origin_start, int horizons) {
  const int p = coeffs.order();
  std::vector<double> out(horizons, 0.0);
  for (int h = 1; h <= horizons; ++h) {
    std::vector<Vector> fc, actual;
    for (Index origin = origin_start; origin + h <= values.rows(); ++origin) {
      const Panel history{values.middleRows(origin - p, p)};
      fc.push_back(forecast(coeffs, history, h).back());
      actual.push_back(values.row(origin + h - 1).transpose());
    }
    out[h - 1] = rmsfe(fc, actual);
  }
  return out;
}

inline void summarize_ratio(StudyResult& result, const std::string& estimator,
                            const std::string& metric, const std::vector<double>& numer,
                            const std::vector<double>& denom) {
  RatioSummary row;
  row.estimator = estimator;
  row.metric = metric;
  std::vector<double> ratios;
  double num_sum = 0.0, den_sum = 0.0;
  for (std::size_t i = 0; i < numer.size(); ++i) {
    num_sum += numer[i];
    den_sum += denom[i];
    if (denom[i] > 0.0) ratios.push_back(numer[i] / denom[i]);
  }
  row.used_replicates = static_cast<int>(ratios.size());
  if (!ratios.empty()) {
    double mean = std::accumulate(ratios.begin(), ratios.end(), 0.0) / ratios.size();
    double var = 0.0;
    for (double r : ratios) var += (r - mean) * (r - mean);
    row.mean_ratio = mean;
    row.se_ratio = ratios.size() > 1 ? std::sqrt(var / (ratios.size() - 1.0) / ratios.size()) : 0.0;
  }
  if (den_sum > 0.0)
    row.ratio_of_means = num_sum / den_sum;
  else
    row.ratio_of_means = num_sum == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  result.summary.push_back(std::move(row));
}

}  // namespace detail

/// Run the full simulation study: one truth per study, `replicates` simulated
/// panels, forward CV per estimator, estimation/support metrics against the
/// truth and h-step test RMSFE. Replicates run in parallel on seeds derived
/// from the master seed; aggregation order is deterministic.
inline StudyResult run_study(const StudyConfig& config) {
  if (config.estimators.empty()) throw DataError("run_study: no estimators configured");
  if (config.replicates < 1) throw DataError("run_study: need at least one replicate");
  if (config.validation_end + 1 > config.t_len)
    throw DataError("run_study: no test data after validation_end");

  const auto [geometry, truth_model] = generate_truth(config.scenario);
  const CoefficientStack truth = CoefficientStack::from_phis(truth_model.phis());
  const std::size_t n_est = config.estimators.size();

  std::vector<std::vector<ReplicateMetrics>> cells(
      static_cast<std::size_t>(config.replicates) * n_est);

  parallel_for(static_cast<std::size_t>(config.replicates), resolve_threads(config.threads),
               [&](std::size_t r) {
    const std::uint64_t seed = split_seed(config.scenario.seed, r);
    const Panel panel = simulate(truth_model, config.t_len, config.burn_in, seed);
    const Panel fit_window{panel.values.topRows(config.validation_end)};

    for (std::size_t e = 0; e < n_est; ++e) {
      const EstimatorConfig& est = config.estimators[e];
      CvPlan plan;
      plan.train_end = config.train_end;
      plan.p_candidates = config.p_candidates;
      plan.c_candidates = est.c_candidates;
      plan.lambda_count = config.lambda_count;
      plan.lambda_ratio = config.lambda_ratio;
      plan.kind = est.kind;
      plan.solver = config.solver;
      const CvResult cv = forward_cv(fit_window, geometry, plan);

      ReplicateMetrics met;
      met.replicate = static_cast<int>(r);
      met.estimator = est.name;
      met.p_opt = cv.p_opt;
      met.c_opt = cv.c_opt;
      met.lambda_opt = cv.lambda_opt;
      const int common_p = std::max(cv.p_opt, truth.order());
      const CoefficientStack est_padded = detail::pad_order(cv.refit.coeffs, common_p);
      const CoefficientStack truth_padded = detail::pad_order(truth, common_p);
      const EstimationErrors errs = estimation_errors(est_padded, truth_padded);
      const SupportMetrics supp = support_metrics(est_padded, truth_padded);
      met.l1 = errs.l1;
      met.l2 = errs.l2;
      met.pfz = supp.pfz;
      met.pfnz = supp.pfnz;
      met.rmsfe = detail::test_rmsfe(cv.refit.coeffs, panel.values, config.validation_end,
                                     config.horizons);
      cells[r * n_est + e] = {std::move(met)};
    }
  });

  StudyResult result;
  result.per_replicate.reserve(cells.size());
  for (auto& cell : cells)
    for (ReplicateMetrics& met : cell) result.per_replicate.push_back(std::move(met));

  // Ratio summaries against the first estimator. l1/l2/RMSFE use the mean of
  // per-replicate ratios; PFZ/PFNZ also report the ratio of means since the
  // baseline counts can be zero at desk scale.
  auto collect = [&](std::size_t e, auto&& get) {
    std::vector<double> vals(config.replicates);
    for (int r = 0; r < config.replicates; ++r)
      vals[r] = get(result.per_replicate[static_cast<std::size_t>(r) * n_est + e]);
    return vals;
  };
  for (std::size_t e = 0; e < n_est; ++e) {
    const std::string& name = config.estimators[e].name;
    detail::summarize_ratio(result, name, "l1",
                            collect(e, [](const ReplicateMetrics& m) { return m.l1; }),
                            collect(0, [](const ReplicateMetrics& m) { return m.l1; }));
    detail::summarize_ratio(result, name, "l2",
                            collect(e, [](const ReplicateMetrics& m) { return m.l2; }),
                            collect(0, [](const ReplicateMetrics& m) { return m.l2; }));
    detail::summarize_ratio(result, name, "pfz",
                            collect(e, [](const ReplicateMetrics& m) { return m.pfz; }),
                            collect(0, [](const ReplicateMetrics& m) { return m.pfz; }));
    detail::summarize_ratio(result, name, "pfnz",
                            collect(e, [](const ReplicateMetrics& m) { return m.pfnz; }),
                            collect(0, [](const ReplicateMetrics& m) { return m.pfnz; }));
    for (int h = 1; h <= config.horizons; ++h) {
      auto get_h = [h](const ReplicateMetrics& m) { return m.rmsfe[h - 1]; };
      detail::summarize_ratio(result, name, "rmsfe_h" + std::to_string(h), collect(e, get_h),
                              collect(0, get_h));
    }
  }
  return result;
}

}  // namespace stvar
