#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "stvar/weights.hpp"
#include "support/oracles.hpp"

using namespace stvar;

TEST_CASE("pairwise distances") {
  Matrix single(1, 2);
  single << 0.3, -0.2;
  REQUIRE(pairwise_distances(single) == Matrix::Zero(1, 1));

  Matrix two(2, 2);
  two << 0, 0, 3, 4;
  Matrix d = pairwise_distances(two);
  REQUIRE(d(0, 1) == Catch::Approx(5.0));
  REQUIRE(d(1, 0) == Catch::Approx(5.0));
  REQUIRE(d(0, 0) == 0.0);

  std::mt19937_64 rng(5);
  Matrix coords = oracle::random_matrix(10, 2, rng);
  Matrix got = pairwise_distances(coords);
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 10; ++j) {
      const double dx = coords(i, 0) - coords(j, 0);
      const double dy = coords(i, 1) - coords(j, 1);
      REQUIRE(got(i, j) == Catch::Approx(std::sqrt(dx * dx + dy * dy)).epsilon(1e-15));
    }

  Matrix bad(1, 2);
  bad << std::numeric_limits<double>::quiet_NaN(), 0.0;
  REQUIRE_THROWS_AS(pairwise_distances(bad), DataError);
}

namespace {

SiteGeometry three_sites() {
  Matrix coords(3, 2);
  coords << 0, 0, 0.5, 0, 1, 0;
  return SiteGeometry::from_coords(coords);
}

}  // namespace

TEST_CASE("weight tensor formulas") {
  SiteGeometry geo = three_sites();  // d_max = 1
  const int p = 2;

  SECTION("c = 0 gives the unweighted problem for kinds 1, 2, 4") {
    for (WeightKind kind :
         {WeightKind::kExpLagDist, WeightKind::kPowerLagDist, WeightKind::kExpDistOnly}) {
      PenaltyWeights w = weight_tensor({kind, 0.0}, geo, p);
      for (const Matrix& wl : w.w) REQUIRE(wl == Matrix::Ones(3, 3));
    }
  }

  SECTION("direct substitution") {
    // l = p, d = d_max, c = 2 -> e^2.
    PenaltyWeights w1 = weight_tensor({WeightKind::kExpLagDist, 2.0}, geo, p);
    REQUIRE(w1.w[1](0, 2) == Catch::Approx(std::exp(2.0)).epsilon(1e-12));
    REQUIRE(w1.w[1](0, 2) == Catch::Approx(7.389056).epsilon(1e-6));

    // l*d/(p*d_max) = 1, c = 2 -> (1 + 1)^2 = 4.
    PenaltyWeights w2 = weight_tensor({WeightKind::kPowerLagDist, 2.0}, geo, p);
    REQUIRE(w2.w[1](0, 2) == Catch::Approx(4.0).epsilon(1e-12));

    PenaltyWeights w3 = weight_tensor({WeightKind::kPowerLagTimesExpDist, 2.0}, geo, p);
    REQUIRE(w3.w[0](0, 2) == Catch::Approx(std::pow(0.5 * std::exp(1.0), 2.0)));

    PenaltyWeights w4 = weight_tensor({WeightKind::kExpDistOnly, 3.0}, geo, p);
    REQUIRE(w4.w[0](0, 1) == Catch::Approx(std::exp(1.5)));
    REQUIRE(w4.w[0] == w4.w[1]);  // lag-free by construction
  }

  SECTION("rejects invalid inputs") {
    REQUIRE_THROWS_AS(weight_tensor({WeightKind::kExpLagDist, -1.0}, geo, p), DataError);
    Matrix one(1, 2);
    one << 0, 0;
    REQUIRE_THROWS_AS(
        weight_tensor({WeightKind::kExpLagDist, 1.0}, SiteGeometry::from_coords(one), 1),
        DataError);
  }
}

TEST_CASE("weights are positive and monotone in distance and lag") {
  std::mt19937_64 rng(9);
  Matrix coords = oracle::random_matrix(8, 2, rng);
  SiteGeometry geo = SiteGeometry::from_coords(coords);
  const int p = 3;
  for (WeightKind kind : {WeightKind::kExpLagDist, WeightKind::kPowerLagDist,
                          WeightKind::kPowerLagTimesExpDist, WeightKind::kExpDistOnly}) {
    for (double c : {0.5, 2.0, 10.0}) {
      PenaltyWeights w = weight_tensor({kind, c}, geo, p);
      for (int l = 0; l < p; ++l) {
        for (Index s = 0; s < 8; ++s)
          for (Index a = 0; a < 8; ++a) {
            REQUIRE(w.w[l](s, a) > 0.0);
            for (Index b = 0; b < 8; ++b)
              if (geo.distance(s, a) <= geo.distance(s, b))
                REQUIRE(w.w[l](s, a) <= w.w[l](s, b));
          }
        if (l > 0 && kind != WeightKind::kExpDistOnly)
          REQUIRE(((w.w[l] - w.w[l - 1]).array() >= -1e-15).all());
      }
    }
  }
}

TEST_CASE("unreachable pairs get infinite weight") {
  Matrix d(2, 2);
  d << 0, std::numeric_limits<double>::infinity(), 2.0, 0;
  SiteGeometry geo = SiteGeometry::from_distances(d);
  REQUIRE(geo.d_max() == 2.0);
  PenaltyWeights w = weight_tensor({WeightKind::kExpLagDist, 1.0}, geo, 1);
  REQUIRE(std::isinf(w.w[0](0, 1)));
  REQUIRE(std::isfinite(w.w[0](1, 0)));
}

TEST_CASE("weight ratio") {
  PenaltyWeights uniform = PenaltyWeights::uniform(1, 3);
  std::vector<std::array<int, 3>> support{{0, 0, 0}, {0, 1, 1}};
  REQUIRE(weight_ratio(uniform, support) == 1.0);

  PenaltyWeights w = uniform;
  w.w[0](0, 0) = 0.1;
  w.w[0](1, 1) = 0.1;
  REQUIRE(weight_ratio(w, support) == Catch::Approx(0.1));

  // Brute-force scan oracle on random weights/support.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(0.1, 5.0);
  PenaltyWeights rand_w = PenaltyWeights::uniform(2, 4);
  for (auto& wl : rand_w.w)
    for (Index i = 0; i < wl.size(); ++i) wl(i) = unif(rng);
  std::vector<std::array<int, 3>> rand_support;
  for (int l = 0; l < 2; ++l)
    for (int s = 0; s < 4; ++s)
      for (int sp = 0; sp < 4; ++sp)
        if (rng() % 3 == 0) rand_support.push_back({l, s, sp});
  double max_on = 0.0, min_off = std::numeric_limits<double>::infinity();
  for (int l = 0; l < 2; ++l)
    for (int s = 0; s < 4; ++s)
      for (int sp = 0; sp < 4; ++sp) {
        bool on = false;
        for (const auto& idx : rand_support)
          if (idx == std::array<int, 3>{l, s, sp}) on = true;
        if (on)
          max_on = std::max(max_on, rand_w.w[l](s, sp));
        else
          min_off = std::min(min_off, rand_w.w[l](s, sp));
      }
  REQUIRE(weight_ratio(rand_w, rand_support) == Catch::Approx(max_on / min_off));

  // Empty complement is rejected.
  std::vector<std::array<int, 3>> all;
  for (int s = 0; s < 3; ++s)
    for (int sp = 0; sp < 3; ++sp) all.push_back({0, s, sp});
  REQUIRE_THROWS_AS(weight_ratio(uniform, all), DataError);
}
