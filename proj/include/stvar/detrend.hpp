#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "stvar/common.hpp"

namespace stvar {

/// Per-site periodic decomposition z_t = mu(d) + sigma(d) * x_t with
/// log sigma(d) = a + b * log mu(d), d the within-period slot of t.
struct TrendModel {
  int period = 168;
  Vector mu;  // mu(d) at slots d = 1..period
  double a = 0.0;
  double b = 0.0;
  double sigma_floor = 0.0;

  double sigma(int slot) const {
    const double m = mu(slot - 1);
    if (!(m > 0.0)) return sigma_floor;
    return std::max(std::exp(a + b * std::log(m)), sigma_floor);
  }
};

/// 1-based slot of time point t: t mod period, with 0 mapped to period.
inline int slot_index(Index t, int period) {
  if (t < 1) throw DimensionError("slot_index: time index is 1-based");
  if (period < 1) throw DimensionError("slot_index: period must be positive");
  const int d = static_cast<int>(t % period);
  return d == 0 ? period : d;
}

namespace detail {

/// Linear-interpolation sample quantile on a sorted copy.
inline double quantile_sorted(const std::vector<double>& sorted, double prob) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = prob * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

inline std::vector<std::vector<Index>> slot_members(Index t_len, int period) {
  std::vector<std::vector<Index>> members(period);
  for (Index t = 0; t < t_len; ++t) members[slot_index(t + 1, period) - 1].push_back(t);
  return members;
}

/// Signed circular offset of slot `from` relative to slot `to`,
/// wrapped into (-period/2, period/2].
inline double circular_offset(int from, int to, int period) {
  double u = from - to;
  if (u > period / 2.0) u -= period;
  if (u <= -period / 2.0) u += period;
  return u;
}

}  // namespace detail

/// Mark outliers per slot: zeros in a slot whose median exceeds
/// `zero_median_threshold`, plus values outside the 1.5 IQR boxplot fences.
inline std::vector<bool> outlier_screen(const Vector& series, int period,
                                        double zero_median_threshold = 30.0,
                                        bool boxplot_rule = true) {
  if (series.size() < period) throw DataError("outlier_screen: series shorter than one period");
  std::vector<bool> mask(series.size(), false);
  const auto members = detail::slot_members(series.size(), period);
  for (const auto& idx : members) {
    if (idx.empty()) continue;
    std::vector<double> vals;
    vals.reserve(idx.size());
    for (Index t : idx) vals.push_back(series(t));
    std::sort(vals.begin(), vals.end());
    const double median = detail::quantile_sorted(vals, 0.5);
    const double q1 = detail::quantile_sorted(vals, 0.25);
    const double q3 = detail::quantile_sorted(vals, 0.75);
    const double iqr = q3 - q1;
    for (Index t : idx) {
      const double v = series(t);
      if (median > zero_median_threshold && v == 0.0) mask[t] = true;
      if (boxplot_rule && (v < q1 - 1.5 * iqr || v > q3 + 1.5 * iqr)) mask[t] = true;
    }
  }
  return mask;
}

/// Local linear kernel regression of the series on its slot index, with a
/// Gaussian kernel over circular slot distance. Masked points are excluded.
/// bandwidth <= 0 selects a Silverman-style default on the slot scale.
inline Vector fit_trend(const Vector& series, const std::vector<bool>& mask, int period,
                        double bandwidth = 0.0) {
  if (series.size() < period) throw DataError("fit_trend: series shorter than one period");
  if (static_cast<Index>(mask.size()) != series.size())
    throw DimensionError("fit_trend: mask length mismatch");
  Index kept = 0;
  for (Index t = 0; t < series.size(); ++t)
    if (!mask[t]) ++kept;
  if (kept < 2) throw DataError("fit_trend: fewer than two unmasked points");
  if (bandwidth <= 0.0) {
    // Silverman-style n^(-1/5) rate on the circular slot scale
    // (period / sqrt(12) is the sd of a uniform slot draw).
    bandwidth = 0.25 * (period / std::sqrt(12.0)) * std::pow(static_cast<double>(kept), -0.2);
  }

  // Pool observations by slot first; the kernel depends only on slot offsets.
  std::vector<double> slot_sum(period, 0.0);
  std::vector<double> slot_count(period, 0.0);
  for (Index t = 0; t < series.size(); ++t) {
    if (mask[t]) continue;
    const int d = slot_index(t + 1, period) - 1;
    slot_sum[d] += series(t);
    slot_count[d] += 1.0;
  }

  Vector mu(period);
  for (int d = 0; d < period; ++d) {
    double sw = 0.0, swu = 0.0, swuu = 0.0, swy = 0.0, swuy = 0.0;
    for (int o = 0; o < period; ++o) {
      if (slot_count[o] == 0.0) continue;
      const double u = detail::circular_offset(o + 1, d + 1, period);
      const double k = std::exp(-0.5 * (u / bandwidth) * (u / bandwidth)) * slot_count[o];
      const double ybar = slot_sum[o] / slot_count[o];
      sw += k;
      swu += k * u;
      swuu += k * u * u;
      swy += k * ybar;
      swuy += k * u * ybar;
    }
    if (sw <= 0.0) throw DataError("fit_trend: empty kernel neighborhood");
    const double det = sw * swuu - swu * swu;
    if (std::abs(det) > 1e-12 * std::max(1.0, sw * swuu)) {
      mu(d) = (swuu * swy - swu * swuy) / det;
    } else {
      mu(d) = swy / sw;  // degenerate spread: fall back to the local mean
    }
  }
  return mu;
}

struct VarianceLink {
  double a = 0.0;
  double b = 0.0;
  Vector slot_sd;  // per-slot residual standard deviation (NaN if undefined)
};

/// Slot-wise residual SD plus the log-log link: regress log(sd(d)) on
/// log(mu(d)) over usable slots. A degenerate regressor (all mu equal)
/// yields b = 0 and a = log(mean sd).
inline VarianceLink fit_variance_link(const Vector& mu_per_slot, const Vector& series,
                                      const std::vector<bool>& mask, int period,
                                      double sigma_floor = 0.0) {
  if (mu_per_slot.size() != period) throw DimensionError("fit_variance_link: mu length mismatch");
  if (static_cast<Index>(mask.size()) != series.size())
    throw DimensionError("fit_variance_link: mask length mismatch");

  VarianceLink link;
  link.slot_sd = Vector::Constant(period, std::numeric_limits<double>::quiet_NaN());
  const auto members = detail::slot_members(series.size(), period);
  for (int d = 0; d < period; ++d) {
    double sum = 0.0, sum2 = 0.0, n = 0.0;
    for (Index t : members[d]) {
      if (mask[t]) continue;
      const double r = series(t) - mu_per_slot(d);
      sum += r;
      sum2 += r * r;
      n += 1.0;
    }
    if (n >= 2.0) {
      const double var = (sum2 - sum * sum / n) / (n - 1.0);
      link.slot_sd(d) = std::sqrt(std::max(var, 0.0));
    }
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, n = 0.0;
  for (int d = 0; d < period; ++d) {
    const double sd = link.slot_sd(d);
    const double mu = mu_per_slot(d);
    if (!std::isfinite(sd) || sd <= sigma_floor || sd <= 0.0 || mu <= 0.0) continue;
    const double x = std::log(mu);
    const double y = std::log(sd);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    n += 1.0;
  }
  if (n < 2.0) throw DataError("fit_variance_link: fewer than two usable slots");
  const double det = n * sxx - sx * sx;
  if (std::abs(det) > 1e-12 * std::max(1.0, n * sxx)) {
    link.b = (n * sxy - sx * sy) / det;
    link.a = (sy - link.b * sx) / n;
  } else {
    // All usable mu identical: no slope information.
    link.b = 0.0;
    double sd_sum = 0.0, sd_n = 0.0;
    for (int d = 0; d < period; ++d)
      if (std::isfinite(link.slot_sd(d)) && link.slot_sd(d) > 0.0) {
        sd_sum += link.slot_sd(d);
        sd_n += 1.0;
      }
    link.a = std::log(sd_sum / sd_n);
  }
  return link;
}

/// x_t = (z_t - mu(d)) / sigma(d); masked points are standardized like any
/// other. Slots where sigma hits the floor are still divided by the floor.
inline Vector standardize(const Vector& series, const TrendModel& trend) {
  if (trend.mu.size() != trend.period) throw DimensionError("standardize: trend shape mismatch");
  if (!(trend.sigma_floor > 0.0)) throw DataError("standardize: sigma_floor must be positive");
  Vector x(series.size());
  for (Index t = 0; t < series.size(); ++t) {
    const int d = slot_index(t + 1, trend.period);
    x(t) = (series(t) - trend.mu(d - 1)) / trend.sigma(d);
  }
  return x;
}

/// z = mu(d) + sigma(d) * x at the supplied 1-based slots.
inline Vector reconstruct(const Vector& x, const TrendModel& trend,
                          const std::vector<int>& slots) {
  if (static_cast<Index>(slots.size()) != x.size())
    throw DimensionError("reconstruct: slot list length mismatch");
  Vector z(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const int d = slots[i];
    if (d < 1 || d > trend.period) throw DataError("reconstruct: slot out of range");
    z(i) = trend.mu(d - 1) + trend.sigma(d) * x(i);
  }
  return z;
}

struct DetrendOptions {
  int period = 168;
  double bandwidth = 0.0;  // <= 0: Silverman-style default
  double zero_median_threshold = 30.0;
  bool boxplot_rule = true;
  double sigma_floor_rel = 1e-6;  // floor = rel * max slot SD
};

struct SiteDetrendResult {
  TrendModel trend;
  std::vector<bool> outlier_mask;
  Vector standardized;
};

/// Full stage-1 pipeline for one series: screen outliers, fit the periodic
/// trend, fit the variance link, standardize.
inline SiteDetrendResult detrend_series(const Vector& series, const DetrendOptions& opt) {
  SiteDetrendResult out;
  out.outlier_mask = outlier_screen(series, opt.period, opt.zero_median_threshold,
                                    opt.boxplot_rule);
  out.trend.period = opt.period;
  out.trend.mu = fit_trend(series, out.outlier_mask, opt.period, opt.bandwidth);
  VarianceLink link = fit_variance_link(out.trend.mu, series, out.outlier_mask, opt.period);
  out.trend.a = link.a;
  out.trend.b = link.b;
  double max_sd = 0.0;
  for (int d = 0; d < opt.period; ++d)
    if (std::isfinite(link.slot_sd(d))) max_sd = std::max(max_sd, link.slot_sd(d));
  out.trend.sigma_floor = std::max(opt.sigma_floor_rel * max_sd, 1e-300);
  out.standardized = standardize(series, out.trend);
  return out;
}

}  // namespace stvar
