#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "panelsynth/errors.hpp"
#include "panelsynth/panel.hpp"

namespace panelsynth {

enum class Method { DID, SC, SDID };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

// Unit weights omega over the n0 controls and time weights lambda over the
// t0 pre-periods. Intercepts exist only for SDID and only inside the weight
// programs; they never enter the treatment-effect formula.
struct WeightSet {
  Method method = Method::DID;
  Eigen::VectorXd omega;
  std::optional<double> omega0;
  Eigen::VectorXd lambda;
  std::optional<double> lambda0;
};

// zeta = (n1*t1)^(1/4) * sqrt(sigma_hat_sq), the ridge scale for the SDID
// unit-weight program.
struct Regularizer {
  double zeta = 0.0;
  double sigma_hat_sq = 0.0;
};

struct SolverOptions {
  double tol = 1e-10;     // relative objective decrease to declare convergence
  int max_iter = 10000;
  double lambda_ridge = 0.0;  // optional ridge for the time-weight program
  std::vector<double>* trace = nullptr;  // per-iteration objective, for tests
};

struct SimplexFit {
  std::optional<double> intercept;
  Eigen::VectorXd w;
  double objective = 0.0;
  int iterations = 0;
};

// Uniform 1/n0 and 1/t0 weights.
WeightSet did_weights(const BlockDesign& design);

// Variance of first-differenced control outcomes over the pre-period:
// mean squared deviation of Delta_it = Y_{i,t+1} - Y_{i,t} around its grand
// mean, i = 1..n0, t = 1..t0-1. Y must be in block order.
double sigma_hat_sq(const Eigen::MatrixXd& Y, const BlockDesign& design);

Regularizer compute_zeta(const BlockDesign& design, double sigma_hat_sq);

// argmin over the probability simplex of
//   ||c*1 + A*w - b||^2 + ridge^2 * rows(A) * ||w||^2
// with c free when with_intercept (profiled out in closed form), else 0.
// Frank-Wolfe with exact line search; deterministic uniform start.
SimplexFit solve_simplex_ls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double ridge,
                            bool with_intercept, const SolverOptions& opts = {});

// Unit weights matching the treated pre-trend: no intercept, no ridge,
// lambda identically zero.
WeightSet sc_unit_weights(const Eigen::MatrixXd& Y, const BlockDesign& design,
                          const SolverOptions& opts = {});

// SDID unit weights: free intercept, ridge = reg.zeta.
WeightSet sdid_unit_weights(const Eigen::MatrixXd& Y, const BlockDesign& design,
                            const Regularizer& reg, const SolverOptions& opts = {});

// SDID time weights: free intercept, ridge = opts.lambda_ridge (0 by default).
WeightSet sdid_time_weights(const Eigen::MatrixXd& Y, const BlockDesign& design,
                            const SolverOptions& opts = {});

// Full SDID weight set: sigma_hat_sq/zeta from the same panel, then the unit
// and time programs.
WeightSet sdid_weights(const Eigen::MatrixXd& Y, const BlockDesign& design,
                       const SolverOptions& opts = {});

}  // namespace panelsynth
