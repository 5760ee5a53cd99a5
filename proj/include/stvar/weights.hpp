#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "stvar/common.hpp"
#include "stvar/var_model.hpp"

namespace stvar {

/// Site locations and pairwise distances. Distances built from coordinates
/// are Euclidean and symmetric; a user-supplied matrix may be asymmetric
/// (directed road distances) and may contain +inf for unreachable pairs.
class SiteGeometry {
 public:
  static SiteGeometry from_coords(Matrix coords) {
    if (coords.cols() != 2) throw DimensionError("SiteGeometry: coords must be m x 2");
    if (!coords.allFinite()) throw DataError("SiteGeometry: non-finite coordinate");
    const Index m = coords.rows();
    Matrix d = Matrix::Zero(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = i + 1; j < m; ++j)
        d(i, j) = d(j, i) = (coords.row(i) - coords.row(j)).norm();
    SiteGeometry g(std::move(d));
    g.coords_ = std::move(coords);
    g.has_coords_ = true;
    return g;
  }

  static SiteGeometry from_distances(Matrix distances) {
    return SiteGeometry(std::move(distances));
  }

  Index sites() const { return distances_.rows(); }
  const Matrix& distances() const { return distances_; }
  double distance(Index s, Index s_prime) const { return distances_(s, s_prime); }
  bool has_coords() const { return has_coords_; }
  const Matrix& coords() const { return coords_; }

  /// Largest finite pairwise distance (the reachable maximum).
  double d_max() const { return d_max_; }

 private:
  explicit SiteGeometry(Matrix distances) : distances_(std::move(distances)) {
    const Index m = distances_.rows();
    if (distances_.cols() != m) throw DimensionError("SiteGeometry: distance matrix not square");
    d_max_ = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (distances_(i, i) != 0.0) throw DataError("SiteGeometry: nonzero diagonal distance");
      for (Index j = 0; j < m; ++j) {
        const double d = distances_(i, j);
        if (std::isnan(d) || d < 0.0) throw DataError("SiteGeometry: invalid distance entry");
        if (std::isfinite(d) && d > d_max_) d_max_ = d;
      }
    }
  }

  Matrix distances_;
  Matrix coords_;
  bool has_coords_ = false;
  double d_max_ = 0.0;
};

inline Matrix pairwise_distances(const Matrix& coords) {
  return SiteGeometry::from_coords(coords).distances();
}

enum class WeightKind {
  kExpLagDist,          // exp(c * l*d / (p*d_max))
  kPowerLagDist,        // (1 + l*d / (p*d_max))^c
  kPowerLagTimesExpDist,  // ((l/p) * exp(d/d_max))^c
  kExpDistOnly,         // exp(c * d / d_max)
};

inline std::string to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::kExpLagDist: return "exp-lag-dist";
    case WeightKind::kPowerLagDist: return "power-lag-dist";
    case WeightKind::kPowerLagTimesExpDist: return "power-of-lag-times-expdist";
    case WeightKind::kExpDistOnly: return "exp-dist-only";
  }
  throw DataError("unknown weight kind");
}

inline WeightKind parse_weight_kind(const std::string& name) {
  if (name == "exp-lag-dist") return WeightKind::kExpLagDist;
  if (name == "power-lag-dist") return WeightKind::kPowerLagDist;
  if (name == "power-of-lag-times-expdist") return WeightKind::kPowerLagTimesExpDist;
  if (name == "exp-dist-only") return WeightKind::kExpDistOnly;
  throw DataError("unknown weight kind: " + name);
}

/// A weight family plus its tuning constant c >= 0. c = 0 makes every
/// weight 1, which is plain LASSO.
struct WeightSpec {
  WeightKind kind = WeightKind::kExpLagDist;
  double c = 0.0;
};

/// Penalty weight per coefficient: w[l](s, s') multiplies |Phi_{l+1,ss'}|.
/// Entries are strictly positive; +inf marks a structurally-zero coefficient
/// (the solver removes that column and pins the estimate to zero).
struct PenaltyWeights {
  std::vector<Matrix> w;

  int order() const { return static_cast<int>(w.size()); }
  Index dim() const { return w.empty() ? 0 : w.front().rows(); }

  static PenaltyWeights uniform(int p, Index m) {
    PenaltyWeights out;
    out.w.assign(p, Matrix::Ones(m, m));
    return out;
  }
};

inline PenaltyWeights weight_tensor(const WeightSpec& spec, const SiteGeometry& geometry, int p) {
  if (p < 1) throw DimensionError("weight_tensor: p must be >= 1");
  if (spec.c < 0.0) throw DataError("weight_tensor: c must be nonnegative");
  const double d_max = geometry.d_max();
  if (d_max <= 0.0) throw DataError("weight_tensor: d_max must be positive");
  const Index m = geometry.sites();
  const double inf = std::numeric_limits<double>::infinity();

  PenaltyWeights out;
  out.w.reserve(p);
  for (int l = 1; l <= p; ++l) {
    Matrix wl(m, m);
    for (Index s = 0; s < m; ++s) {
      for (Index sp = 0; sp < m; ++sp) {
        const double d = geometry.distance(s, sp);
        if (!std::isfinite(d)) {
          wl(s, sp) = inf;  // unreachable pair: force the coefficient to zero
          continue;
        }
        const double scaled = static_cast<double>(l) * d / (p * d_max);
        switch (spec.kind) {
          case WeightKind::kExpLagDist:
            wl(s, sp) = std::exp(spec.c * scaled);
            break;
          case WeightKind::kPowerLagDist:
            wl(s, sp) = std::pow(1.0 + scaled, spec.c);
            break;
          case WeightKind::kPowerLagTimesExpDist:
            wl(s, sp) = std::pow(static_cast<double>(l) / p * std::exp(d / d_max), spec.c);
            break;
          case WeightKind::kExpDistOnly:
            wl(s, sp) = std::exp(spec.c * d / d_max);
            break;
        }
      }
    }
    out.w.push_back(std::move(wl));
  }
  return out;
}

/// Ratio between the largest weight on the support J and the smallest weight
/// off it. Scale-free: normalizing min{w : J^C} = 1 leaves it unchanged.
inline double weight_ratio(const PenaltyWeights& weights,
                           const std::vector<std::array<int, 3>>& support) {
  const int p = weights.order();
  const Index m = weights.dim();
  std::vector<bool> on(static_cast<std::size_t>(p) * m * m, false);
  for (const auto& [l, s, sp] : support) {
    if (l < 0 || l >= p || s < 0 || s >= m || sp < 0 || sp >= m)
      throw DimensionError("weight_ratio: support index out of range");
    on[(static_cast<std::size_t>(l) * m + s) * m + sp] = true;
  }
  double max_on = 0.0;
  double min_off = std::numeric_limits<double>::infinity();
  bool has_off = false;
  std::size_t idx = 0;
  for (int l = 0; l < p; ++l)
    for (Index s = 0; s < m; ++s)
      for (Index sp = 0; sp < m; ++sp, ++idx) {
        const double v = weights.w[l](s, sp);
        if (on[idx]) {
          max_on = std::max(max_on, v);
        } else {
          min_off = std::min(min_off, v);
          has_off = true;
        }
      }
  if (!has_off) throw DataError("weight_ratio: support complement is empty");
  return max_on / min_off;
}

/// Support of a coefficient stack as (l, s, s') triples (exact nonzeros).
inline std::vector<std::array<int, 3>> support_indices(const CoefficientStack& stack) {
  std::vector<std::array<int, 3>> out;
  for (int l = 0; l < stack.order(); ++l)
    for (int s = 0; s < stack.dim(); ++s)
      for (int sp = 0; sp < stack.dim(); ++sp)
        if (stack.phi(l, s, sp) != 0.0) out.push_back({l, s, sp});
  return out;
}

}  // namespace stvar
