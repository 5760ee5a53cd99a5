#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stvar/scenario.hpp"

using namespace stvar;

TEST_CASE("lattice construction") {
  Matrix grid = make_lattice(1, /*jitter=*/false);
  REQUIRE(grid.rows() == 441);
  REQUIRE(grid(0, 0) == Catch::Approx(0.05));
  REQUIRE(grid(440, 1) == Catch::Approx(1.05));
  // Exact 0.05 spacing without jitter.
  REQUIRE(grid(21, 0) - grid(0, 0) == Catch::Approx(0.05));

  Matrix jittered = make_lattice(2);
  REQUIRE(jittered.minCoeff() >= 0.04);
  REQUIRE(jittered.maxCoeff() <= 1.06);
  REQUIRE(make_lattice(2) == jittered);     // deterministic
  REQUIRE(make_lattice(3) != jittered);
}

TEST_CASE("exactly sparse truth is masked at the cutoff distance") {
  ScenarioSpec spec;
  spec.scenario = 'a';
  spec.m = 25;
  spec.seed = 11;
  auto [geometry, model] = generate_truth(spec);
  REQUIRE(is_stationary(model));
  const Matrix& phi = model.phis().front();
  for (Index s = 0; s < 25; ++s) {
    REQUIRE(phi(s, s) != 0.0);  // d = 0 is always inside the mask
    for (Index sp = 0; sp < 25; ++sp) {
      if (geometry.distance(s, sp) > 0.05) REQUIRE(phi(s, sp) == 0.0);
      if (phi(s, sp) != 0.0) {
        REQUIRE(std::abs(phi(s, sp)) >= 0.1);
        REQUIRE(std::abs(phi(s, sp)) <= 0.5);
      }
    }
  }
}

TEST_CASE("weakly sparse truths follow the decay laws") {
  ScenarioSpec spec;
  spec.scenario = 'b';
  spec.m = 15;
  spec.seed = 13;
  auto [geometry, model] = generate_truth(spec);
  const Matrix& phi = model.phis().front();
  for (Index s = 0; s < 15; ++s)
    for (Index sp = 0; sp < 15; ++sp) {
      REQUIRE(phi(s, sp) != 0.0);  // never exactly sparse
      REQUIRE(std::abs(phi(s, sp)) ==
              Catch::Approx(0.55 / std::exp(20.0 * geometry.distance(s, sp))));
    }
  REQUIRE(std::abs(phi(0, 0)) == Catch::Approx(0.55));

  spec.scenario = 'c';
  auto [geo_c, model_c] = generate_truth(spec);
  REQUIRE(std::abs(model_c.phis().front()(0, 0)) == Catch::Approx(0.25));
  // Spot value at distance 0.1 under the slow-decay law.
  const double d = geo_c.distance(0, 1);
  REQUIRE(std::abs(model_c.phis().front()(0, 1)) == Catch::Approx(0.25 / std::exp(5.0 * d)));
}

TEST_CASE("setting 2 samples the two corners") {
  ScenarioSpec spec;
  spec.scenario = 'a';
  spec.setting = 2;
  spec.m = 20;
  spec.seed = 17;
  auto [geometry, model] = generate_truth(spec);
  int lower = 0, upper = 0;
  for (Index s = 0; s < 20; ++s) {
    const double x = geometry.coords()(s, 0);
    const double y = geometry.coords()(s, 1);
    const bool in_lower = x < 0.5 && y < 0.5;
    const bool in_upper = x > 0.5 && y > 0.5;
    REQUIRE((in_lower || in_upper));
    lower += in_lower;
    upper += in_upper;
  }
  REQUIRE(lower == 10);
  REQUIRE(upper == 10);

  spec.order = 2;
  REQUIRE_THROWS_AS(generate_truth(spec), DataError);
}

TEST_CASE("higher-order scenarios honor the per-lag rules") {
  ScenarioSpec spec;
  spec.order = 2;
  spec.scenario = 'a';
  spec.m = 20;
  spec.seed = 19;
  auto [geometry, model] = generate_truth(spec);
  REQUIRE(model.order() == 2);
  REQUIRE(is_stationary(model));
  for (Index s = 0; s < 20; ++s)
    for (Index sp = 0; sp < 20; ++sp) {
      const double d = geometry.distance(s, sp);
      if (d > 0.06) REQUIRE(model.phis()[0](s, sp) == 0.0);
      if (d > 0.04) REQUIRE(model.phis()[1](s, sp) == 0.0);
    }

  spec.order = 3;
  spec.scenario = 'b';
  spec.m = 12;
  auto [geo3, model3] = generate_truth(spec);
  REQUIRE(model3.order() == 3);
  for (int l = 0; l < 3; ++l)
    REQUIRE(std::abs(model3.phis()[l](0, 0)) == Catch::Approx(0.3));
  const double d01 = geo3.distance(0, 1);
  for (int l = 0; l < 3; ++l)
    REQUIRE(std::abs(model3.phis()[l](0, 1)) ==
            Catch::Approx(0.3 / std::exp(25.0 * (l + 1) * d01)));
}

TEST_CASE("truth generation is deterministic in the seed") {
  ScenarioSpec spec;
  spec.scenario = 'a';
  spec.m = 10;
  spec.seed = 23;
  auto [ga, ma] = generate_truth(spec);
  auto [gb, mb] = generate_truth(spec);
  REQUIRE(ga.coords() == gb.coords());
  REQUIRE(ma.phis().front() == mb.phis().front());
}

TEST_CASE("study with the baseline against itself gives unit ratios") {
  StudyConfig config;
  config.scenario.scenario = 'a';
  config.scenario.m = 8;
  config.scenario.seed = 29;
  config.replicates = 2;
  config.t_len = 60;
  config.train_end = 25;
  config.validation_end = 40;
  config.p_candidates = {1};
  config.lambda_count = 8;
  config.horizons = 5;
  config.estimators = {{"lasso", WeightKind::kExpLagDist, {0.0}},
                       {"lasso-again", WeightKind::kExpLagDist, {0.0}}};
  config.threads = 2;
  StudyResult result = run_study(config);

  REQUIRE(result.per_replicate.size() == 4);
  for (const ReplicateMetrics& m : result.per_replicate)
    REQUIRE(m.rmsfe.size() == 5);  // one RMSFE per horizon

  for (const RatioSummary& row : result.summary) {
    if (row.used_replicates > 0) {
      REQUIRE(row.mean_ratio == 1.0);
      REQUIRE(row.se_ratio == 0.0);
    }
    REQUIRE(row.ratio_of_means == 1.0);
  }
}

TEST_CASE("study output is deterministic across thread counts") {
  StudyConfig config;
  config.scenario.scenario = 'a';
  config.scenario.m = 6;
  config.scenario.seed = 31;
  config.replicates = 3;
  config.t_len = 50;
  config.train_end = 20;
  config.validation_end = 35;
  config.p_candidates = {1};
  config.lambda_count = 5;
  config.horizons = 2;
  config.estimators = {{"lasso", WeightKind::kExpLagDist, {0.0}},
                       {"wlasso", WeightKind::kExpLagDist, {10.0}}};
  config.threads = 1;
  StudyResult a = run_study(config);
  config.threads = 2;
  StudyResult b = run_study(config);
  REQUIRE(a.per_replicate.size() == b.per_replicate.size());
  for (std::size_t i = 0; i < a.per_replicate.size(); ++i) {
    REQUIRE(a.per_replicate[i].l2 == b.per_replicate[i].l2);
    REQUIRE(a.per_replicate[i].rmsfe == b.per_replicate[i].rmsfe);
  }
}
