#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "panelsynth/panel.hpp"

namespace panelsynth {

// Latent-factor data-generating process with a known additive effect on
// treated post-treatment cells:
//   Y_it = unit_fe_i + time_fe_t + factor_scale * sum_k gamma_ik * phi_tk
//          + effect * 1[i treated, t post] + Normal(0, noise_sd^2).
struct DgpSpec {
  int n0 = 1;
  int n1 = 1;
  int t0 = 1;
  int t1 = 1;
  double effect = 0.0;
  int n_factors = 0;
  double factor_scale = 1.0;
  double noise_sd = 0.0;
  double unit_fe_sd = 0.0;
  double time_fe_sd = 0.0;
  std::uint64_t seed = 0;
};

struct GeneratedPanel {
  Panel panel;
  double true_ate = 0.0;
};

// Deterministic in spec.seed. Control units are labelled C001.., treated
// T001..; periods are consecutive quarters from 2020Q1.
GeneratedPanel generate_panel(const DgpSpec& spec);

struct GridFit {
  std::optional<double> intercept;
  Eigen::VectorXd w;
  double objective = 0.0;
};

// Brute-force oracle: enumerates every simplex grid point at the given
// resolution (which must divide 1 evenly), profiles the intercept out in
// closed form when requested, and returns the point with the smallest exact
// objective ||c + A*w - b||^2. Ties go to the lexicographically smallest
// weight vector. Only for small problems: columns(A) <= 4.
GridFit grid_oracle_weights(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            bool with_intercept, double resolution);

// Four-means difference-in-differences computed by direct summation, kept
// free of the weight machinery so it can check it.
double oracle_ate_did(const Eigen::MatrixXd& Y, const BlockDesign& design);

}  // namespace panelsynth
