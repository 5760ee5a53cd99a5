#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "stvar/evaluation.hpp"
#include "stvar/scenario.hpp"
#include "stvar/solver.hpp"
#include "support/oracles.hpp"

using namespace stvar;

TEST_CASE("symmetric VAR(1) constants: closed forms") {
  const Index m = 4;
  Matrix sigma = Matrix::Identity(m, m);

  TheoryQuantities q = theory_symmetric_var1(0.5 * Matrix::Identity(m, m), sigma, 100);
  REQUIRE(q.rho == Catch::Approx(0.5));
  REQUIRE(q.mu_max == Catch::Approx(2.25));
  REQUIRE(q.mu_min == Catch::Approx(0.25));
  REQUIRE(q.mu_min_tilde == Catch::Approx(0.25));
  REQUIRE(q.alpha == Catch::Approx(1.0 / 4.5));

  TheoryQuantities zero = theory_symmetric_var1(Matrix::Zero(m, m), sigma, 100);
  REQUIRE(zero.mu_max == Catch::Approx(1.0));
  REQUIRE(zero.mu_min == Catch::Approx(1.0));

  REQUIRE_THROWS_AS(theory_symmetric_var1(Matrix::Identity(m, m), sigma, 100), DataError);
  Matrix asym = Matrix::Zero(2, 2);
  asym(0, 1) = 0.5;
  REQUIRE_THROWS_AS(theory_symmetric_var1(asym, Matrix::Identity(2, 2), 100), DataError);
}

TEST_CASE("mu extrema on the unit circle: scalar geometry") {
  std::vector<Matrix> zero{Matrix::Zero(3, 3)};
  MuExtrema flat = mu_extrema_numeric(zero, 32);
  REQUIRE(flat.mu_min == Catch::Approx(1.0));
  REQUIRE(flat.mu_max == Catch::Approx(1.0));

  // m = 1, phi = 0.5: |1 - 0.5 z|^2 ranges over [0.25, 2.25] on |z| = 1.
  Matrix half(1, 1);
  half << 0.5;
  MuExtrema scalar = mu_extrema_numeric({half}, 720);
  REQUIRE(scalar.mu_min == Catch::Approx(0.25).margin(1e-3));
  REQUIRE(scalar.mu_max == Catch::Approx(2.25).margin(1e-3));

  REQUIRE_THROWS_AS(mu_extrema_numeric({half}, 4), DimensionError);
}

TEST_CASE("numeric extrema match the symmetric closed form") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> radius_dist(0.05, 0.95);
  for (int rep = 0; rep < 50; ++rep) {
    const Index m = 2 + static_cast<Index>(rng() % 19);  // up to 20
    const double radius = radius_dist(rng);
    Matrix phi = oracle::random_symmetric_with_radius(m, radius, rng);
    MuExtrema numeric = mu_extrema_numeric({phi}, 720);
    const double lo = (1.0 - radius) * (1.0 - radius);
    const double hi = (1.0 + radius) * (1.0 + radius);
    REQUIRE(std::abs(numeric.mu_min - lo) <= 1e-3);
    REQUIRE(std::abs(numeric.mu_max - hi) <= 1e-3);

    TheoryQuantities q = theory_symmetric_var1(phi, Matrix::Identity(m, m), 100);
    REQUIRE(std::abs(numeric.mu_min - q.mu_min) <= 1e-3);
    REQUIRE(std::abs(numeric.mu_max - q.mu_max) <= 1e-3);
  }
}

TEST_CASE("companion polynomial shares mu_min for VAR(1)") {
  std::mt19937_64 rng(31);
  Matrix phi = oracle::random_symmetric_with_radius(5, 0.6, rng);
  VarModel model({phi}, Matrix::Identity(5, 5));
  TheoryQuantities numeric = theory_numeric(model, 100, 720);
  TheoryQuantities closed = theory_symmetric_var1(phi, model.sigma(), 100);
  REQUIRE(numeric.rho == Catch::Approx(closed.rho).margin(1e-8));
  REQUIRE(numeric.mu_min_tilde == Catch::Approx(closed.mu_min_tilde).margin(1e-3));
  REQUIRE(numeric.alpha == Catch::Approx(closed.alpha).margin(1e-3));
  REQUIRE(numeric.omega == Catch::Approx(closed.omega).epsilon(2e-2));
  REQUIRE(numeric.q_const == Catch::Approx(closed.q_const).epsilon(2e-2));
}

TEST_CASE("exact-sparsity bound coefficients") {
  // r_w = 1 recovers the plain-lasso coefficient pattern (3, 12, 9/2, 12, 9).
  ExactSparsityBounds lasso = exact_sparsity_bounds(4.0, 0.5, 2.0, 1.0, 0.1);
  REQUIRE(lasso.l2 == Catch::Approx(3.0 * std::sqrt(4.0) * 0.5 / 2.0));
  REQUIRE(lasso.l1 == Catch::Approx(12.0 * 4.0 * 0.5 / 2.0));
  REQUIRE(lasso.prediction == Catch::Approx(4.5 * 4.0 * 0.25 / 2.0));
  REQUIRE(lasso.false_zeros == Catch::Approx(12.0 * 4.0 * 0.5 / (0.1 * 2.0)));
  REQUIRE(lasso.false_nonzeros == Catch::Approx(9.0 * 4.0 / 2.0));

  // r_w -> 0 shrinks the l2 bound to a third of the lasso bound.
  ExactSparsityBounds tight = exact_sparsity_bounds(4.0, 0.5, 2.0, 0.0, 0.1);
  REQUIRE(tight.l2 == Catch::Approx(lasso.l2 / 3.0));
  REQUIRE(tight.l1 == Catch::Approx(lasso.l1 / 6.0));
  REQUIRE(tight.prediction == Catch::Approx(lasso.prediction / 9.0));

  REQUIRE(exact_sparsity_bounds(1.0, 1.0, 1.0, 0.0, 1.0).l2 == Catch::Approx(1.0));
  REQUIRE_THROWS_AS(exact_sparsity_bounds(1.0, 1.0, 0.0, 1.0, 1.0), DataError);
}

TEST_CASE("weak-sparsity bounds reduce to the exact-sparsity forms") {
  for (double r_w : {0.0, 0.3, 1.0, 2.5}) {
    for (double k : {1.0, 7.0}) {
      const double lambda = 0.37, alpha = 1.8, s0 = 0.1;
      WeakSparsityBounds weak = weak_sparsity_bounds(k, 0.0, lambda, alpha, r_w, 1.0, 1.0);
      ExactSparsityBounds exact = exact_sparsity_bounds(k, lambda, alpha, r_w, s0);
      REQUIRE(weak.l2 == exact.l2);
      REQUIRE(weak.l1 == exact.l1);
      REQUIRE(weak.prediction == exact.prediction);
    }
  }
}

TEST_CASE("weak-sparsity bounds: arithmetic spot check at all-ones input") {
  WeakSparsityBounds b = weak_sparsity_bounds(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
  // Hand evaluation of the three displays with every argument 1.
  const double l2 = 3.0 * 1.0 + 2.0 * std::sqrt(1.0) + 4.0 * 1.0;
  REQUIRE(b.l2 == Catch::Approx(l2));
  REQUIRE(b.l1 == Catch::Approx(4.0 * l2 + 4.0));
  REQUIRE(b.prediction == Catch::Approx(1.5 * l2 + 2.0));
}

TEST_CASE("lr-ball bound evaluates the closed form") {
  const double w1 = 1.0, w2 = 2.0, r = 0.5, radius = 3.0, lambda = 0.1;
  const double alpha = 0.8, omega = 1.2, q_const = 2.0;
  const double first = (w1 + 2.0 * w2 + 2.0 * std::sqrt(w2)) * std::pow(alpha, (r - 2.0) / 2.0) *
                       std::sqrt(radius) * std::pow(lambda, (2.0 - r) / 2.0);
  const double second = 4.0 * w2 * std::max(omega, 1.0) / q_const * std::pow(alpha, r - 1.0) *
                        radius * std::pow(lambda, 2.0 - r);
  REQUIRE(lr_ball_bound(w1, w2, r, radius, lambda, alpha, omega, q_const) ==
          Catch::Approx(first + second).epsilon(1e-12));
}

TEST_CASE("observed l2 error sits inside the exact-sparsity bound") {
  // Sanity containment at desk scale with lambda at the theoretical level;
  // not a sharpness statement.
  int contained = 0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    ScenarioSpec spec;
    spec.scenario = 'a';
    spec.m = 10;
    spec.seed = 4000 + rep;
    auto [geometry, model] = generate_truth(spec);
    const CoefficientStack truth = CoefficientStack::from_phis(model.phis());
    Panel panel = simulate(model, 120, 400, split_seed(spec.seed, 3));
    LaggedRegression reg = build_design(panel, 1);

    const TheoryQuantities theory = theory_numeric(model, reg.n_obs(), 360);
    const double rate = std::sqrt((std::log(1.0) + 2.0 * std::log(double(spec.m))) /
                                  double(reg.n_obs()));
    const double lambda_n = 4.0 * theory.q_const * rate;

    // The gradient-noise (deviation) level ||X'(Y - X B*)||_inf / N must sit
    // below q_const * rate for the bound to apply; a1 = a2 = 1 suffices here.
    const Matrix b_true = truth.matrix();
    const Matrix score = reg.design.transpose() * (reg.response - reg.design * b_true) /
                         double(reg.n_obs());
    REQUIRE(score.cwiseAbs().maxCoeff() <= theory.q_const * rate);

    const PenaltyWeights weights =
        weight_tensor({WeightKind::kExpLagDist, 10.0}, geometry, 1);

    // Normalize as the theory does: smallest off-support weight equal to 1.
    const auto truth_support = support_indices(truth);
    const double r_w = weight_ratio(weights, truth_support);
    FitResult fitres = fit(reg, weights, lambda_n);
    const double observed = estimation_errors(fitres.coeffs, truth).l2;
    const double s0 = [&] {
      double lo = std::numeric_limits<double>::infinity();
      for (const auto& [l, s, sp] : truth_support)
        lo = std::min(lo, std::abs(truth.phi(l, s, sp)));
      return lo;
    }();
    const ExactSparsityBounds bound =
        exact_sparsity_bounds(double(truth_support.size()), lambda_n, theory.alpha, r_w, s0);
    if (observed <= bound.l2) ++contained;
  }
  REQUIRE(contained >= static_cast<int>(0.95 * reps));
}
