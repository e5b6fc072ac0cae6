#pragma once

#include <Eigen/Dense>
#include <optional>

#include "panelsynth/panel.hpp"
#include "panelsynth/weights.hpp"

namespace panelsynth {

struct AteEstimate {
  Method method = Method::DID;
  double ate = 0.0;
  std::optional<double> se;
  int stars = 0;  // 0..3
  double baseline_mean = 0.0;
  long n_obs = 0;  // N*T of the analyzed panel
  WeightSet weights;
};

// Per-period paths behind the trend figures: the treated-group mean, the
// omega-weighted control path (plus intercept when present), and the
// pre-period time-weight profile.
struct TrendSeries {
  Eigen::VectorXd treated_path;
  Eigen::VectorXd synthetic_path;
  Eigen::VectorXd lambda_profile;
};

// The weighted treatment-effect contrast shared by all three methods:
// mean over treated of (post mean - lambda-weighted pre) minus the
// omega-weighted same contrast over controls. Intercepts never enter.
double ate_from_weights(const Eigen::MatrixXd& Y, const BlockDesign& design, const WeightSet& w);

// Mean outcome over all units across pre-treatment periods.
double baseline_mean(const Eigen::MatrixXd& Y, const BlockDesign& design);

// Method dispatch for the weight programs.
WeightSet fit_weights(const Eigen::MatrixXd& Y, const BlockDesign& design, Method method,
                      const SolverOptions& opts = {});

// Point estimate on a block-ordered matrix; the piece bootstrap replicates
// re-run.
double estimate_ate(const Eigen::MatrixXd& Y, const BlockDesign& design, Method method,
                    const SolverOptions& opts = {});

// Full estimate on a panel. Standard errors stay empty; inference fills them.
AteEstimate estimate(const Panel& panel, Method method, const SolverOptions& opts = {});

TrendSeries trend_series(const Eigen::MatrixXd& Y, const BlockDesign& design, const WeightSet& w);

// Two-sided normal thresholds: * p<.10, ** p<.05, *** p<.01.
int stars_for(double ate, double se);

}  // namespace panelsynth
