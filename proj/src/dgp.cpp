#include "panelsynth/dgp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "panelsynth/rng.hpp"

namespace panelsynth {

namespace {

std::string padded_label(const char* prefix, int k) {
  std::string s = std::to_string(k);
  while (s.size() < 3) s.insert(s.begin(), '0');
  return prefix + s;
}

}  // namespace

GeneratedPanel generate_panel(const DgpSpec& spec) {
  if (spec.n0 < 1 || spec.n1 < 1 || spec.t0 < 1 || spec.t1 < 1)
    throw Error("generate_panel: all block counts must be >= 1");
  if (spec.noise_sd < 0 || spec.unit_fe_sd < 0 || spec.time_fe_sd < 0)
    throw Error("generate_panel: standard deviations must be >= 0");

  const int n = spec.n0 + spec.n1;
  const int T = spec.t0 + spec.t1;

  auto rng = seeded_rng(spec.seed, 0);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  auto draw = [&](double sd) { return sd > 0.0 ? sd * std_normal(rng) : 0.0; };

  Eigen::VectorXd unit_fe(n), time_fe(T);
  for (int i = 0; i < n; ++i) unit_fe[i] = draw(spec.unit_fe_sd);
  for (int t = 0; t < T; ++t) time_fe[t] = draw(spec.time_fe_sd);

  Eigen::MatrixXd loadings(n, std::max(spec.n_factors, 0));
  Eigen::MatrixXd factors(T, std::max(spec.n_factors, 0));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < spec.n_factors; ++k) loadings(i, k) = std_normal(rng);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < spec.n_factors; ++k) factors(t, k) = std_normal(rng);

  Eigen::MatrixXd Y(n, T);
  for (int i = 0; i < n; ++i) {
    const bool treated = i >= spec.n0;
    for (int t = 0; t < T; ++t) {
      double y = unit_fe[i] + time_fe[t];
      for (int k = 0; k < spec.n_factors; ++k)
        y += spec.factor_scale * loadings(i, k) * factors(t, k);
      if (treated && t >= spec.t0) y += spec.effect;
      y += draw(spec.noise_sd);
      Y(i, t) = y;
    }
  }

  std::vector<std::string> periods;
  periods.reserve(T);
  std::string q = "2020Q1";
  for (int t = 0; t < T; ++t) {
    periods.push_back(q);
    q = next_quarter(q);
  }

  std::vector<PanelRecord> records;
  records.reserve(static_cast<size_t>(n) * T);
  std::vector<std::string> treated_units;
  for (int i = 0; i < n; ++i) {
    const std::string unit =
        i < spec.n0 ? padded_label("C", i + 1) : padded_label("T", i - spec.n0 + 1);
    if (i >= spec.n0) treated_units.push_back(unit);
    for (int t = 0; t < T; ++t) records.push_back({unit, periods[t], Y(i, t)});
  }

  GeneratedPanel out{Panel::build(records), spec.effect};
  out.panel.set_treatment(treated_units, periods[spec.t0]);
  return out;
}

GridFit grid_oracle_weights(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            bool with_intercept, double resolution) {
  const Eigen::Index n = A.cols();
  if (n < 1 || A.rows() < 1)
    throw DimensionMismatch("grid_oracle_weights: empty problem");
  if (b.size() != A.rows())
    throw DimensionMismatch("grid_oracle_weights: b does not match A");
  if (n > 4)
    throw TooManyColumns("grid_oracle_weights: " + std::to_string(n) +
                         " columns; grid search supports at most 4");
  const double steps_real = 1.0 / resolution;
  const long steps = std::lround(steps_real);
  if (!(resolution > 0.0) || std::abs(steps * resolution - 1.0) > 1e-9)
    throw Error("grid_oracle_weights: resolution must divide 1 evenly");

  GridFit best;
  best.objective = std::numeric_limits<double>::infinity();

  Eigen::VectorXd w(n);
  auto evaluate = [&]() {
    double c = 0.0;
    if (with_intercept) c = (b - A * w).mean();
    const Eigen::VectorXd resid = (A * w).array() + c - b.array();
    const double obj = resid.squaredNorm();
    if (obj < best.objective) {  // lexicographic enumeration: first hit wins ties
      best.objective = obj;
      best.w = w;
      if (with_intercept) best.intercept = c;
    }
  };

  // Enumerate compositions of `steps` into n parts, lexicographically
  // ascending in the weight vector.
  std::vector<long> counts(n, 0);
  auto recurse = [&](auto&& self, Eigen::Index pos, long remaining) -> void {
    if (pos == n - 1) {
      counts[pos] = remaining;
      for (Eigen::Index i = 0; i < n; ++i)
        w[i] = static_cast<double>(counts[i]) / static_cast<double>(steps);
      evaluate();
      return;
    }
    for (long c = 0; c <= remaining; ++c) {
      counts[pos] = c;
      self(self, pos + 1, remaining - c);
    }
  };
  recurse(recurse, 0, steps);
  return best;
}

double oracle_ate_did(const Eigen::MatrixXd& Y, const BlockDesign& d) {
  if (Y.rows() != d.n0 + d.n1 || Y.cols() != d.t0 + d.t1)
    throw DimensionMismatch("oracle_ate_did: matrix does not match design");

  double treated_pre = 0.0, treated_post = 0.0, control_pre = 0.0, control_post = 0.0;
  for (int i = 0; i < d.n0; ++i) {
    for (int t = 0; t < d.t0; ++t) control_pre += Y(i, t);
    for (int t = d.t0; t < d.t0 + d.t1; ++t) control_post += Y(i, t);
  }
  for (int i = d.n0; i < d.n0 + d.n1; ++i) {
    for (int t = 0; t < d.t0; ++t) treated_pre += Y(i, t);
    for (int t = d.t0; t < d.t0 + d.t1; ++t) treated_post += Y(i, t);
  }
  treated_pre /= static_cast<double>(d.n1) * d.t0;
  treated_post /= static_cast<double>(d.n1) * d.t1;
  control_pre /= static_cast<double>(d.n0) * d.t0;
  control_post /= static_cast<double>(d.n0) * d.t1;
  return (treated_post - treated_pre) - (control_post - control_pre);
}

}  // namespace panelsynth
