#include <doctest.h>

#include <random>

#include "panelsynth/dgp.hpp"
#include "panelsynth/weights.hpp"
#include "test_helpers.hpp"

using namespace panelsynth;
using test_util::rand_unif;

TEST_CASE("did_weights are uniform") {
  BlockDesign d{4, 3, 5, 2, {}};
  WeightSet w = did_weights(d);
  for (int i = 0; i < 4; ++i) CHECK(w.omega[i] == 0.25);
  for (int t = 0; t < 5; ++t) CHECK(w.lambda[t] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_FALSE(w.omega0.has_value());
  CHECK_FALSE(w.lambda0.has_value());

  BlockDesign single{1, 1, 1, 1, {}};
  CHECK(did_weights(single).omega[0] == 1.0);

  BlockDesign paper{27, 120, 11, 2, {}};
  WeightSet wp = did_weights(paper);
  CHECK(wp.omega[13] == doctest::Approx(1.0 / 27).epsilon(1e-15));
  CHECK(wp.lambda[7] == doctest::Approx(1.0 / 11).epsilon(1e-15));
  test_util::require_valid_weights(wp, paper);
}

TEST_CASE("sigma_hat_sq on the worked 2x3 instance is exactly 0.6875") {
  Eigen::MatrixXd Y(3, 4);  // 2 controls + 1 treated row, 3 pre + 1 post
  Y << 0, 1, 3, 0,
       0, 2, 2, 0,
       9, 9, 9, 9;
  BlockDesign d{2, 1, 3, 1, {}};
  CHECK(sigma_hat_sq(Y, d) == 0.6875);
}

TEST_CASE("sigma_hat_sq vanishes for constant and common-trend controls") {
  BlockDesign d{3, 1, 4, 1, {}};
  Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(4, 5, 7.0);
  CHECK(sigma_hat_sq(Y, d) == 0.0);

  // identical linear trends with slope s, different intercepts
  const double s = 1.7;
  for (int i = 0; i < 4; ++i)
    for (int t = 0; t < 5; ++t) Y(i, t) = 3.0 * i + s * t;
  CHECK(sigma_hat_sq(Y, d) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sigma_hat_sq requires two pre-periods") {
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(2, 2);
  BlockDesign d{1, 1, 1, 1, {}};
  CHECK_THROWS_AS(sigma_hat_sq(Y, d), InsufficientPrePeriods);
}

TEST_CASE("sigma_hat_sq is invariant to level shifts and common linear trends") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    auto b = test_util::random_block(rng);
    const double base = sigma_hat_sq(b.Y, b.design);

    Eigen::MatrixXd shifted = b.Y.array() + 123.456;
    CHECK(test_util::rel_close(sigma_hat_sq(shifted, b.design), base, 1e-10));

    Eigen::MatrixXd trended = b.Y;
    const double slope = rand_unif(rng, -3, 3);
    for (int i = 0; i < trended.rows(); ++i)
      for (int t = 0; t < trended.cols(); ++t) trended(i, t) += slope * t;
    CHECK(test_util::rel_close(sigma_hat_sq(trended, b.design), base, 1e-10));
  }
}

TEST_CASE("compute_zeta follows the quarter-root rule") {
  CHECK(compute_zeta({3, 5, 4, 2, {}}, 0.0).zeta == 0.0);
  // (16*1)^(1/4) * sqrt(4) = 2 * 2
  CHECK(compute_zeta({3, 16, 4, 1, {}}, 4.0).zeta == doctest::Approx(4.0).epsilon(1e-14));
  const Regularizer reg = compute_zeta({27, 120, 11, 2, {}}, 2.25);
  CHECK(reg.zeta == doctest::Approx(std::pow(240.0, 0.25) * 1.5).epsilon(1e-14));
  // type invariant: zeta == (n1*t1)^(1/4)*sqrt(sigma2) within 1e-12 relative
  CHECK(test_util::rel_close(reg.zeta, std::pow(120.0 * 2, 0.25) * std::sqrt(reg.sigma_hat_sq),
                             1e-12));
}

TEST_CASE("solve_simplex_ls: single column short-circuits to the point") {
  Eigen::MatrixXd A(3, 1);
  A << 1, 2, 3;
  Eigen::VectorXd b(3);
  b << 4, 4, 4;
  SimplexFit fit = solve_simplex_ls(A, b, 0.0, false);
  CHECK(fit.w[0] == 1.0);
  CHECK_FALSE(fit.intercept.has_value());

  SimplexFit with_c = solve_simplex_ls(A, b, 0.0, true);
  CHECK(with_c.w[0] == 1.0);
  CHECK(*with_c.intercept == doctest::Approx(2.0).epsilon(1e-14));  // mean(b - A)
}

TEST_CASE("solve_simplex_ls: exact column match lands on the vertex") {
  std::mt19937_64 rng(33);
  Eigen::MatrixXd A(5, 4);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) A(i, j) = rand_unif(rng, -4, 4);
  Eigen::VectorXd b = A.col(2);
  SimplexFit fit = solve_simplex_ls(A, b, 0.0, false);
  CHECK(fit.objective <= 1e-12);
  CHECK(fit.w[2] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("solve_simplex_ls matches the grid oracle on random 4x3 instances") {
  std::mt19937_64 rng(55);
  for (int rep = 0; rep < 25; ++rep) {
    Eigen::MatrixXd A(4, 3);
    Eigen::VectorXd b(4);
    for (int i = 0; i < 4; ++i) {
      b[i] = rand_unif(rng, -3, 3);
      for (int j = 0; j < 3; ++j) A(i, j) = rand_unif(rng, -3, 3);
    }
    SimplexFit fit = solve_simplex_ls(A, b, 0.0, false);
    GridFit oracle = grid_oracle_weights(A, b, false, 0.01);
    CHECK(fit.objective <= oracle.objective + 1e-6);
    CHECK(oracle.objective >= fit.objective - 1e-9);  // grid cannot beat the optimum
  }
}

TEST_CASE("solve_simplex_ls objective decreases monotonically") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::MatrixXd A(6, 5);
    Eigen::VectorXd b(6);
    for (int i = 0; i < 6; ++i) {
      b[i] = rand_unif(rng, -3, 3);
      for (int j = 0; j < 5; ++j) A(i, j) = rand_unif(rng, -3, 3);
    }
    std::vector<double> trace;
    SolverOptions opts;
    opts.trace = &trace;
    solve_simplex_ls(A, b, rep % 2 ? 0.3 : 0.0, rep % 3 == 0, opts);
    REQUIRE(trace.size() >= 2);
    for (size_t k = 1; k < trace.size(); ++k)
      CHECK(trace[k] <= trace[k - 1] * (1 + 1e-12) + 1e-300);
  }
}

TEST_CASE("solve_simplex_ls reports non-convergence with its best iterate") {
  Eigen::MatrixXd A(4, 3);
  A << 1, 0, 0,
       0, 1, 0,
       0, 0, 1,
       1, 1, 1;
  Eigen::VectorXd b(4);
  b << 5, -3, 2, 0;
  SolverOptions opts;
  opts.max_iter = 1;  // cannot finish in one step
  try {
    solve_simplex_ls(A, b, 0.0, false, opts);
    FAIL("expected DidNotConverge");
  } catch (const DidNotConverge& e) {
    CHECK(e.best.size() == 3);
    CHECK(std::isfinite(e.objective));
  }
}

TEST_CASE("solve_simplex_ls validates shapes") {
  Eigen::MatrixXd A(3, 2);
  A.setZero();
  Eigen::VectorXd b(2);
  b.setZero();
  CHECK_THROWS_AS(solve_simplex_ls(A, b, 0.0, false), DimensionMismatch);
}

TEST_CASE("sc_unit_weights picks an exactly matching control") {
  // control 0 equals the treated mean pre-trajectory
  Eigen::MatrixXd Y(4, 5);
  Y << 1, 2, 3, 4, 9,
       5, 5, 5, 5, 9,
       0, 1, 4, 4, 7,
       2, 3, 2, 4, 7;
  BlockDesign d{2, 2, 4, 1, {}};
  Y.row(0) = 0.5 * (Y.row(2) + Y.row(3));
  WeightSet w = sc_unit_weights(Y, d);
  test_util::require_valid_weights(w, d);
  CHECK(w.omega[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(w.lambda.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sc_unit_weights recovers a convex combination") {
  Eigen::MatrixXd Y(3, 5);
  Y << 1, 2, 5, 3, 0,   // control 1
       3, 6, 1, 5, 0,   // control 2
       0, 0, 0, 0, 0;   // treated = midpoint (set below)
  Y.row(2).head(4) = 0.5 * (Y.row(0).head(4) + Y.row(1).head(4));
  BlockDesign d{2, 1, 4, 1, {}};
  WeightSet w = sc_unit_weights(Y, d);
  CHECK(w.omega[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(w.omega[1] == doctest::Approx(0.5).epsilon(1e-6));

  Eigen::MatrixXd A = Y.block(0, 0, 2, 4).transpose();
  Eigen::VectorXd b = Y.row(2).head(4).transpose();
  GridFit oracle = grid_oracle_weights(A, b, false, 0.01);
  CHECK(oracle.objective <= 1e-9);  // oracle confirms a perfect fit exists
}

TEST_CASE("sdid_unit_weights absorbs a level shift into the intercept") {
  std::mt19937_64 rng(42);
  const int t0 = 6;
  Eigen::VectorXd target(t0);
  for (int t = 0; t < t0; ++t) target[t] = rand_unif(rng, 0, 8);
  const double shift = 3.25;

  // every control = treated mean - shift
  Eigen::MatrixXd Y(5, t0 + 2);
  for (int i = 0; i < 4; ++i)
    for (int t = 0; t < t0; ++t) Y(i, t) = target[t] - shift;
  for (int t = 0; t < t0; ++t) Y(4, t) = target[t];
  Y.rightCols(2).setZero();
  BlockDesign d{4, 1, t0, 2, {}};

  const Regularizer reg = compute_zeta(d, sigma_hat_sq(Y, d));
  CHECK(reg.zeta == 0.0);  // identical first differences
  WeightSet w = sdid_unit_weights(Y, d, reg);
  REQUIRE(w.omega0.has_value());
  CHECK(*w.omega0 == doctest::Approx(shift).epsilon(1e-8));
  for (int i = 0; i < 4; ++i) CHECK(w.omega[i] == doctest::Approx(0.25).epsilon(1e-8));

  // residual of the fitted pre-trajectory is ~0
  Eigen::VectorXd fitted =
      Y.block(0, 0, 4, t0).transpose() * w.omega;
  fitted.array() += *w.omega0;
  CHECK((fitted - target).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("a huge ridge pulls sdid unit weights to uniform") {
  std::mt19937_64 rng(101);
  for (int rep = 0; rep < 10; ++rep) {
    auto b = test_util::random_block(rng, {3, 8, 1, 5, 3, 8, 1, 3});
    Regularizer reg = compute_zeta(b.design, sigma_hat_sq(b.Y, b.design) * 1e12);
    if (reg.zeta == 0.0) reg = compute_zeta(b.design, 1e12);
    WeightSet w = sdid_unit_weights(b.Y, b.design, reg);
    const double uniform = 1.0 / b.design.n0;
    CHECK((w.omega.array() - uniform).abs().maxCoeff() <= 1e-4);
  }
}

TEST_CASE("sdid_unit_weights with zeta 0 reaches an exact interior fit") {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd Y(3, 6);
  for (int t = 0; t < 6; ++t) {
    Y(0, t) = rand_unif(rng, -5, 5);
    Y(1, t) = rand_unif(rng, -5, 5);
  }
  Y.row(2) = 0.4 * Y.row(0) + 0.6 * Y.row(1);
  BlockDesign d{2, 1, 4, 2, {}};
  WeightSet w = sdid_unit_weights(Y, d, Regularizer{0.0, 0.0});
  CHECK(w.omega[0] == doctest::Approx(0.4).epsilon(1e-7));
  CHECK(w.omega[1] == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(*w.omega0 == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("sdid_time_weights: single pre-period short-circuits") {
  Eigen::MatrixXd Y(3, 3);
  Y << 1, 4, 6,
       2, 3, 5,
       0, 0, 0;
  BlockDesign d{2, 1, 1, 2, {}};
  WeightSet w = sdid_time_weights(Y, d);
  CHECK(w.lambda[0] == 1.0);
  // post means: (5, 4); lambda0 = mean(post_mean - first column) = mean(4, 2)
  CHECK(*w.lambda0 == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("sdid_time_weights: constant controls give a free perfect fit") {
  Eigen::MatrixXd Y(3, 7);
  Y.row(0).setConstant(4.0);
  Y.row(1).setConstant(-2.0);
  Y.row(2).setConstant(1.0);
  BlockDesign d{2, 1, 5, 2, {}};
  WeightSet w = sdid_time_weights(Y, d);
  CHECK(std::abs(w.lambda.sum() - 1.0) <= 1e-8);
  CHECK(w.lambda.minCoeff() >= -1e-12);
  CHECK(*w.lambda0 == doctest::Approx(0.0).epsilon(1e-10));
  // objective at the returned point
  Eigen::VectorXd fitted = Y.block(0, 0, 2, 5) * w.lambda;
  fitted.array() += *w.lambda0;
  Eigen::VectorXd post = Y.block(0, 5, 2, 2).rowwise().mean();
  CHECK((fitted - post).squaredNorm() <= 1e-16);
}

TEST_CASE("sdid_time_weights concentrate on the final pre-period when it predicts post") {
  std::mt19937_64 rng(404);
  const int n0 = 8, t0 = 3;
  Eigen::MatrixXd Y(n0 + 1, t0 + 2);
  for (int i = 0; i < n0; ++i) {
    for (int t = 0; t < t0; ++t) Y(i, t) = rand_unif(rng, -5, 5);
    Y(i, t0) = Y(i, t0 - 1);  // post periods replay the last pre value
    Y(i, t0 + 1) = Y(i, t0 - 1);
  }
  Y.row(n0).setZero();
  BlockDesign d{n0, 1, t0, 2, {}};
  WeightSet w = sdid_time_weights(Y, d);
  CHECK(w.lambda[t0 - 1] >= 1.0 - 1e-4);

  // grid oracle agrees the vertex is optimal
  Eigen::MatrixXd A = Y.block(0, 0, n0, t0);
  Eigen::VectorXd b = Y.block(0, t0, n0, 2).rowwise().mean();
  GridFit oracle = grid_oracle_weights(A, b, true, 0.01);
  CHECK(oracle.objective <= 1e-12);
  CHECK(oracle.w[t0 - 1] == 1.0);
}

TEST_CASE("solved weight sets satisfy their invariants on random panels") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 40; ++rep) {
    auto b = test_util::random_block(rng);
    test_util::require_valid_weights(sc_unit_weights(b.Y, b.design), b.design);
    test_util::require_valid_weights(sdid_weights(b.Y, b.design), b.design);
    test_util::require_valid_weights(did_weights(b.design), b.design);
  }
}

TEST_CASE("weights are invariant to level shifts and scaling") {
  std::mt19937_64 rng(909);
  for (int rep = 0; rep < 15; ++rep) {
    auto b = test_util::random_block(rng, {2, 6, 1, 4, 3, 7, 1, 3});
    const double c = rand_unif(rng, -10, 10);
    const double k = rand_unif(rng, 0.5, 4.0);

    WeightSet sc0 = sc_unit_weights(b.Y, b.design);
    WeightSet sdid0 = sdid_weights(b.Y, b.design);

    Eigen::MatrixXd shifted = b.Y.array() + c;
    WeightSet sc_shift = sc_unit_weights(shifted, b.design);
    WeightSet sdid_shift = sdid_weights(shifted, b.design);
    CHECK((sc_shift.omega - sc0.omega).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((sdid_shift.omega - sdid0.omega).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((sdid_shift.lambda - sdid0.lambda).cwiseAbs().maxCoeff() <= 1e-8);

    Eigen::MatrixXd scaled = b.Y * k;
    WeightSet sc_scale = sc_unit_weights(scaled, b.design);
    WeightSet sdid_scale = sdid_weights(scaled, b.design);
    CHECK((sc_scale.omega - sc0.omega).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((sdid_scale.omega - sdid0.omega).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((sdid_scale.lambda - sdid0.lambda).cwiseAbs().maxCoeff() <= 1e-8);
  }
}
