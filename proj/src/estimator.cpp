#include "panelsynth/estimator.hpp"

#include <cmath>

namespace panelsynth {

double ate_from_weights(const Eigen::MatrixXd& Y, const BlockDesign& d, const WeightSet& w) {
  if (Y.rows() != d.n0 + d.n1 || Y.cols() != d.t0 + d.t1)
    throw DimensionMismatch("ate_from_weights: matrix does not match design");
  if (w.omega.size() != d.n0)
    throw DimensionMismatch("ate_from_weights: omega has " + std::to_string(w.omega.size()) +
                            " entries, design has n0 = " + std::to_string(d.n0));
  if (w.lambda.size() != d.t0)
    throw DimensionMismatch("ate_from_weights: lambda has " + std::to_string(w.lambda.size()) +
                            " entries, design has t0 = " + std::to_string(d.t0));

  // Per-unit contrast: post-period mean minus lambda-weighted pre-period sum.
  const Eigen::VectorXd post_mean =
      Y.block(0, d.t0, Y.rows(), d.t1).rowwise().mean();
  const Eigen::VectorXd pre_weighted = Y.block(0, 0, Y.rows(), d.t0) * w.lambda;
  const Eigen::VectorXd contrast = post_mean - pre_weighted;

  const double treated_term = contrast.tail(d.n1).mean();
  const double control_term = w.omega.dot(contrast.head(d.n0));
  return treated_term - control_term;
}

double baseline_mean(const Eigen::MatrixXd& Y, const BlockDesign& d) {
  if (Y.rows() != d.n0 + d.n1 || Y.cols() < d.t0)
    throw DimensionMismatch("baseline_mean: matrix does not match design");
  return Y.block(0, 0, Y.rows(), d.t0).mean();
}

WeightSet fit_weights(const Eigen::MatrixXd& Y, const BlockDesign& d, Method method,
                      const SolverOptions& opts) {
  switch (method) {
    case Method::DID: return did_weights(d);
    case Method::SC: return sc_unit_weights(Y, d, opts);
    case Method::SDID: return sdid_weights(Y, d, opts);
  }
  throw Error("fit_weights: unknown method");
}

double estimate_ate(const Eigen::MatrixXd& Y, const BlockDesign& d, Method method,
                    const SolverOptions& opts) {
  return ate_from_weights(Y, d, fit_weights(Y, d, method, opts));
}

AteEstimate estimate(const Panel& panel, Method method, const SolverOptions& opts) {
  const BlockDesign d = to_block(panel);
  const Eigen::MatrixXd Y = block_matrix(panel, d);

  AteEstimate est;
  est.method = method;
  est.weights = fit_weights(Y, d, method, opts);
  est.ate = ate_from_weights(Y, d, est.weights);
  est.baseline_mean = baseline_mean(Y, d);
  est.n_obs = static_cast<long>(panel.n_units()) * panel.n_periods();
  return est;
}

TrendSeries trend_series(const Eigen::MatrixXd& Y, const BlockDesign& d, const WeightSet& w) {
  if (Y.rows() != d.n0 + d.n1 || Y.cols() != d.t0 + d.t1)
    throw DimensionMismatch("trend_series: matrix does not match design");
  if (w.omega.size() != d.n0)
    throw DimensionMismatch("trend_series: omega does not match design");
  if (w.lambda.size() != d.t0)
    throw DimensionMismatch("trend_series: lambda does not match design");

  TrendSeries s;
  s.treated_path = Y.bottomRows(d.n1).colwise().mean().transpose();
  s.synthetic_path = Y.topRows(d.n0).transpose() * w.omega;
  if (w.omega0) s.synthetic_path.array() += *w.omega0;
  s.lambda_profile = w.lambda;
  return s;
}

int stars_for(double ate, double se) {
  if (!(se > 0.0)) return ate != 0.0 ? 3 : 0;  // degenerate zero-variance case
  const double z = std::abs(ate / se);
  if (z >= 2.576) return 3;
  if (z >= 1.960) return 2;
  if (z >= 1.645) return 1;
  return 0;
}

}  // namespace panelsynth
