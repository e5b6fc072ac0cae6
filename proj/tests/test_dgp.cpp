#include <doctest.h>

#include <random>

#include "panelsynth/dgp.hpp"
#include "panelsynth/estimator.hpp"
#include "test_helpers.hpp"

using namespace panelsynth;
using test_util::rand_unif;

TEST_CASE("generate_panel is deterministic in its seed") {
  DgpSpec spec;
  spec.n0 = 5;
  spec.n1 = 3;
  spec.t0 = 4;
  spec.t1 = 2;
  spec.effect = 2.0;
  spec.n_factors = 2;
  spec.noise_sd = 1.0;
  spec.unit_fe_sd = 1.0;
  spec.time_fe_sd = 1.0;
  spec.seed = 31;
  GeneratedPanel a = generate_panel(spec);
  GeneratedPanel b = generate_panel(spec);
  CHECK((a.panel.outcomes() - b.panel.outcomes()).norm() == 0.0);
  CHECK(a.true_ate == 2.0);

  spec.seed = 32;
  GeneratedPanel c = generate_panel(spec);
  CHECK((a.panel.outcomes() - c.panel.outcomes()).norm() != 0.0);

  spec.effect = 0.0;
  CHECK(generate_panel(spec).true_ate == 0.0);
}

TEST_CASE("a pure two-way panel hands DiD the exact effect") {
  DgpSpec spec;
  spec.n0 = 7;
  spec.n1 = 5;
  spec.t0 = 5;
  spec.t1 = 3;
  spec.effect = -1.25;
  spec.unit_fe_sd = 2.0;
  spec.time_fe_sd = 1.5;
  spec.seed = 8;
  GeneratedPanel gen = generate_panel(spec);
  AteEstimate est = estimate(gen.panel, Method::DID);
  CHECK(std::abs(est.ate - spec.effect) <= 1e-10);
}

TEST_CASE("all three estimators recover the effect when controls match treated") {
  DgpSpec spec;
  spec.n0 = 6;
  spec.n1 = 3;
  spec.t0 = 5;
  spec.t1 = 2;
  spec.effect = 5.0;
  spec.time_fe_sd = 2.0;  // unit_fe_sd = 0 keeps the treated mean in the control hull
  spec.seed = 77;
  GeneratedPanel gen = generate_panel(spec);
  for (Method m : {Method::DID, Method::SC, Method::SDID})
    CHECK(std::abs(estimate(gen.panel, m).ate - 5.0) <= 1e-8);
}

TEST_CASE("DiD is unbiased across seeds under parallel trends") {
  DgpSpec spec;
  spec.n0 = 6;
  spec.n1 = 6;
  spec.t0 = 4;
  spec.t1 = 2;
  spec.effect = 1.0;
  spec.noise_sd = 1.0;
  spec.unit_fe_sd = 1.0;
  spec.time_fe_sd = 1.0;

  const int runs = 200;
  double sum = 0.0, sumsq = 0.0;
  for (int s = 0; s < runs; ++s) {
    spec.seed = 1000 + s;
    GeneratedPanel gen = generate_panel(spec);
    const BlockDesign d = to_block(gen.panel);
    const double ate = oracle_ate_did(block_matrix(gen.panel, d), d);
    sum += ate;
    sumsq += ate * ate;
  }
  const double mean = sum / runs;
  const double sd = std::sqrt((sumsq - runs * mean * mean) / (runs - 1));
  const double mc_se = sd / std::sqrt(static_cast<double>(runs));
  CHECK(std::abs(mean - spec.effect) <= 3.0 * mc_se);
}

TEST_CASE("grid oracle basics") {
  Eigen::MatrixXd A(3, 1);
  A << 1, 2, 3;
  Eigen::VectorXd b(3);
  b << 0, 0, 0;
  GridFit one = grid_oracle_weights(A, b, false, 0.01);
  CHECK(one.w[0] == 1.0);

  Eigen::MatrixXd A3(4, 3);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) A3(i, j) = rand_unif(rng, -5, 5);
  GridFit hit = grid_oracle_weights(A3, A3.col(1), false, 0.01);
  CHECK(hit.objective == 0.0);
  CHECK(hit.w[0] == 0.0);
  CHECK(hit.w[1] == 1.0);
  CHECK(hit.w[2] == 0.0);
}

TEST_CASE("grid oracle rejects oversized or uneven grids") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 5);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(grid_oracle_weights(A, b, false, 0.01), TooManyColumns);
  Eigen::MatrixXd A2 = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(grid_oracle_weights(A2, b, false, 0.03), Error);
}

TEST_CASE("solver stays within the grid discretization bound") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd A(5, 3);
    Eigen::VectorXd b(5);
    for (int i = 0; i < 5; ++i) {
      b[i] = rand_unif(rng, -4, 4);
      for (int j = 0; j < 3; ++j) A(i, j) = rand_unif(rng, -4, 4);
    }
    SimplexFit fit = solve_simplex_ls(A, b, 0.0, false);
    GridFit oracle = grid_oracle_weights(A, b, false, 0.01);

    CHECK(oracle.objective >= fit.objective - 1e-9);
    CHECK(fit.objective <= oracle.objective + 1e-6);

    // Analytic discretization bound: moving from the optimum to the nearest
    // grid point changes w by at most ||d||_1 <= 2*resolution*(n-1), so
    // f(grid) - f(opt) <= 2||A'r*||_inf ||d||_1 + smax(A)^2 ||d||_2^2.
    const Eigen::VectorXd resid = A * fit.w - b;
    const double g_inf = (A.transpose() * resid).cwiseAbs().maxCoeff();
    const double d1 = 2.0 * 0.01 * (3 - 1);
    const double smax = A.jacobiSvd().singularValues()[0];
    const double bound = 2.0 * g_inf * d1 + smax * smax * d1 * d1;
    CHECK(oracle.objective - fit.objective <= bound + 1e-9);
  }
}

TEST_CASE("oracle_ate_did hand cases") {
  Eigen::MatrixXd Y(2, 2);
  Y << 0, 0,
       0, 5;
  BlockDesign d{1, 1, 1, 1, {}};
  CHECK(oracle_ate_did(Y, d) == 5.0);

  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 6, 2.0);
  BlockDesign d2{2, 2, 3, 3, {}};
  CHECK(oracle_ate_did(flat, d2) == 0.0);
}
