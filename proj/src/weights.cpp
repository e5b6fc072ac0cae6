#include "panelsynth/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace panelsynth {

std::string to_string(Method m) {
  switch (m) {
    case Method::DID: return "DID";
    case Method::SC: return "SC";
    case Method::SDID: return "SDID";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  std::string up;
  for (char c : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "DID" || up == "DD") return Method::DID;
  if (up == "SC") return Method::SC;
  if (up == "SDID" || up == "SDD") return Method::SDID;
  throw InputError("unknown method: " + name + " (expected did, sc or sdid)");
}

WeightSet did_weights(const BlockDesign& design) {
  if (design.n0 < 1 || design.t0 < 1)
    throw DimensionMismatch("did_weights: invalid design");
  WeightSet w;
  w.method = Method::DID;
  w.omega = Eigen::VectorXd::Constant(design.n0, 1.0 / design.n0);
  w.lambda = Eigen::VectorXd::Constant(design.t0, 1.0 / design.t0);
  return w;
}

double sigma_hat_sq(const Eigen::MatrixXd& Y, const BlockDesign& design) {
  if (design.t0 < 2)
    throw InsufficientPrePeriods("sigma_hat_sq: needs at least 2 pre-periods, got " +
                                 std::to_string(design.t0));
  if (Y.rows() < design.n0 || Y.cols() < design.t0)
    throw DimensionMismatch("sigma_hat_sq: matrix smaller than design");

  const int n0 = design.n0;
  const int nd = design.t0 - 1;
  Eigen::MatrixXd diffs =
      Y.block(0, 1, n0, nd) - Y.block(0, 0, n0, nd);
  const double grand_mean = diffs.mean();
  return (diffs.array() - grand_mean).square().sum() / (static_cast<double>(n0) * nd);
}

Regularizer compute_zeta(const BlockDesign& design, double sigma_hat_sq) {
  if (sigma_hat_sq < 0)
    throw Error("compute_zeta: negative variance");
  Regularizer reg;
  reg.sigma_hat_sq = sigma_hat_sq;
  reg.zeta = std::pow(static_cast<double>(design.n1) * design.t1, 0.25) * std::sqrt(sigma_hat_sq);
  return reg;
}

namespace {

// Exact objective at (c, w) on the original (uncentered) data.
double exact_objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double c,
                       const Eigen::VectorXd& w, double ridge) {
  const Eigen::VectorXd resid = (A * w).array() + c - b.array();
  return resid.squaredNorm() +
         ridge * ridge * static_cast<double>(A.rows()) * w.squaredNorm();
}

}  // namespace

SimplexFit solve_simplex_ls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double ridge,
                            bool with_intercept, const SolverOptions& opts) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (m < 1 || n < 1)
    throw DimensionMismatch("solve_simplex_ls: A must have at least one row and column");
  if (b.size() != m)
    throw DimensionMismatch("solve_simplex_ls: b has " + std::to_string(b.size()) +
                            " entries, A has " + std::to_string(m) + " rows");
  if (ridge < 0) throw Error("solve_simplex_ls: ridge must be nonnegative");

  SimplexFit fit;

  // The simplex is a single point.
  if (n == 1) {
    fit.w = Eigen::VectorXd::Ones(1);
    double c = 0.0;
    if (with_intercept) {
      c = (b - A.col(0)).mean();
      fit.intercept = c;
    }
    fit.objective = exact_objective(A, b, c, fit.w, ridge);
    return fit;
  }

  // A free intercept is equivalent to centering each column of A and b: for
  // fixed w the optimal c is mean(b - A*w), and plugging it back leaves the
  // least-squares term of the centered problem.
  Eigen::MatrixXd Ac = A;
  Eigen::VectorXd bc = b;
  if (with_intercept) {
    const Eigen::RowVectorXd col_means = A.colwise().mean();
    Ac.rowwise() -= col_means;
    bc.array() -= b.mean();
  }

  const double eta = ridge * ridge * static_cast<double>(m);

  // Frank-Wolfe with away steps and exact line search. Plain FW zig-zags near
  // faces of the simplex and its per-iteration decrease flattens out long
  // before tight tolerances; the away-step variant converges linearly for
  // these quadratics while keeping the iterate an explicit convex combination
  // of vertices (feasibility is exact by construction).
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd resid = Ac * w - bc;
  double prev = resid.squaredNorm() + eta * w.squaredNorm();
  if (opts.trace) {
    opts.trace->clear();
    opts.trace->push_back(prev);
  }

  bool converged = (prev == 0.0);
  int it = 0;
  double cur = prev;
  Eigen::VectorXd grad(n), dir(n), a_dir(m);
  while (!converged && it < opts.max_iter) {
    ++it;
    grad = 2.0 * (Ac.transpose() * resid) + 2.0 * eta * w;

    // Toward the vertex with the steepest descent...
    Eigen::Index fw = 0;
    grad.minCoeff(&fw);
    const double gap_fw = grad.dot(w) - grad[fw];

    // ...or away from the worst vertex currently in the support.
    Eigen::Index away = -1;
    double away_grad = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
      if (w[i] > 0.0 && grad[i] > away_grad) {
        away_grad = grad[i];
        away = i;
      }
    const double gap_away = away_grad - grad.dot(w);

    double gamma_max;
    bool away_step = false;
    if (gap_fw >= gap_away || away < 0 || w[away] >= 1.0) {
      dir = -w;
      dir[fw] += 1.0;
      a_dir = Ac.col(fw) - (resid + bc);  // Ac * dir
      gamma_max = 1.0;
    } else {
      away_step = true;
      dir = w;
      dir[away] -= 1.0;
      a_dir = (resid + bc) - Ac.col(away);
      gamma_max = w[away] / (1.0 - w[away]);
    }

    // Exact line search for the quadratic along w + gamma*dir.
    const double num = -grad.dot(dir);
    const double den = 2.0 * (a_dir.squaredNorm() + eta * dir.squaredNorm());
    double gamma = den > 0.0 ? num / den : 0.0;
    gamma = std::clamp(gamma, 0.0, gamma_max);

    w += gamma * dir;
    if (away_step && gamma == gamma_max) w[away] = 0.0;  // vertex leaves the support
    resid += gamma * a_dir;
    if (it % 128 == 0) resid = Ac * w - bc;  // refresh accumulated rounding

    cur = resid.squaredNorm() + eta * w.squaredNorm();
    if (opts.trace) opts.trace->push_back(cur);

    const double rel_decrease = (prev - cur) / std::max(prev, 1e-300);
    if (rel_decrease <= opts.tol) {
      converged = true;
      break;
    }
    prev = cur;
  }
  fit.iterations = it;

  if (!converged) {
    std::vector<double> best(w.data(), w.data() + w.size());
    throw DidNotConverge("solve_simplex_ls: no convergence after " +
                             std::to_string(opts.max_iter) + " iterations (objective " +
                             std::to_string(cur) + ")",
                         std::move(best), cur);
  }

  // Clear rounding dust off the simplex before reporting.
  for (Eigen::Index i = 0; i < n; ++i)
    if (w[i] < 0.0 && w[i] > -1e-13) w[i] = 0.0;
  const double total = w.sum();
  if (total > 0.0) w /= total;

  double c = 0.0;
  if (with_intercept) {
    c = (b - A * w).mean();
    fit.intercept = c;
  }
  fit.w = std::move(w);
  fit.objective = exact_objective(A, b, c, fit.w, ridge);
  return fit;
}

namespace {

// t0 x n0 matrix of control pre-period outcomes (periods as rows) and the
// treated group's mean pre-trajectory, the shared inputs of both unit-weight
// programs.
void unit_program_inputs(const Eigen::MatrixXd& Y, const BlockDesign& d, Eigen::MatrixXd& A,
                         Eigen::VectorXd& b) {
  if (Y.rows() != d.n0 + d.n1 || Y.cols() != d.t0 + d.t1)
    throw DimensionMismatch("unit weights: matrix does not match design");
  A = Y.block(0, 0, d.n0, d.t0).transpose();
  b = Y.block(d.n0, 0, d.n1, d.t0).colwise().mean().transpose();
}

}  // namespace

WeightSet sc_unit_weights(const Eigen::MatrixXd& Y, const BlockDesign& design,
                          const SolverOptions& opts) {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  unit_program_inputs(Y, design, A, b);
  SimplexFit fit = solve_simplex_ls(A, b, 0.0, false, opts);

  WeightSet w;
  w.method = Method::SC;
  w.omega = std::move(fit.w);
  w.lambda = Eigen::VectorXd::Zero(design.t0);
  return w;
}

WeightSet sdid_unit_weights(const Eigen::MatrixXd& Y, const BlockDesign& design,
                            const Regularizer& reg, const SolverOptions& opts) {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  unit_program_inputs(Y, design, A, b);
  SimplexFit fit = solve_simplex_ls(A, b, reg.zeta, true, opts);

  WeightSet w;
  w.method = Method::SDID;
  w.omega = std::move(fit.w);
  w.omega0 = fit.intercept;
  return w;
}

WeightSet sdid_time_weights(const Eigen::MatrixXd& Y, const BlockDesign& design,
                            const SolverOptions& opts) {
  if (Y.rows() != design.n0 + design.n1 || Y.cols() != design.t0 + design.t1)
    throw DimensionMismatch("time weights: matrix does not match design");

  // Rows are control units; regress their post-period mean on the pre-period
  // outcomes with a free intercept.
  Eigen::MatrixXd A = Y.block(0, 0, design.n0, design.t0);
  Eigen::VectorXd b =
      Y.block(0, design.t0, design.n0, design.t1).rowwise().mean();
  SimplexFit fit = solve_simplex_ls(A, b, opts.lambda_ridge, true, opts);

  WeightSet w;
  w.method = Method::SDID;
  w.lambda = std::move(fit.w);
  w.lambda0 = fit.intercept;
  return w;
}

WeightSet sdid_weights(const Eigen::MatrixXd& Y, const BlockDesign& design,
                       const SolverOptions& opts) {
  const Regularizer reg = compute_zeta(design, sigma_hat_sq(Y, design));
  WeightSet unit = sdid_unit_weights(Y, design, reg, opts);
  WeightSet time = sdid_time_weights(Y, design, opts);

  WeightSet w;
  w.method = Method::SDID;
  w.omega = std::move(unit.omega);
  w.omega0 = unit.omega0;
  w.lambda = std::move(time.lambda);
  w.lambda0 = time.lambda0;
  return w;
}

}  // namespace panelsynth
