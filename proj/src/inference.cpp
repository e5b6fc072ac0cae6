#include "panelsynth/inference.hpp"

#include <cmath>

#include "panelsynth/rng.hpp"

namespace panelsynth {

BootstrapResult bootstrap_se(const Panel& panel, Method method, int replicates,
                             std::uint64_t seed, const BootstrapOptions& opts) {
  if (replicates < 2) throw Error("bootstrap_se: need at least 2 replicates");

  const BlockDesign design = to_block(panel);
  if (design.n0 < 1 || design.n1 < 1)
    throw DegenerateDesign("bootstrap_se: treated or control block empty");
  const Eigen::MatrixXd Y = block_matrix(panel, design);
  const int n_units = design.n0 + design.n1;

  const long max_redraws =
      opts.max_redraws < 0 ? 100L * replicates : opts.max_redraws;

  BootstrapResult result;
  result.replicates = replicates;
  result.seed = seed;
  result.method = method;
  result.n_obs = static_cast<long>(panel.n_units()) * panel.n_periods();
  result.estimates.resize(replicates);

  std::vector<int> draw(n_units);
  for (int b = 1; b <= replicates; ++b) {
    auto rng = seeded_rng(seed, static_cast<std::uint64_t>(b));

    int n0b = 0;
    for (;;) {
      n0b = 0;
      for (int i = 0; i < n_units; ++i) {
        draw[i] = static_cast<int>(bounded_uint64(rng, n_units));
        if (draw[i] < design.n0) ++n0b;
      }
      if (n0b > 0 && n0b < n_units) break;
      if (++result.redraws > max_redraws)
        throw TooManyRedraws("bootstrap_se: exceeded " + std::to_string(max_redraws) +
                             " redraws; design is nearly degenerate");
    }

    // Reassemble in block order: drawn controls first, then drawn treated,
    // each in draw order.
    Eigen::MatrixXd Yb(n_units, Y.cols());
    int row = 0;
    for (int i = 0; i < n_units; ++i)
      if (draw[i] < design.n0) Yb.row(row++) = Y.row(draw[i]);
    for (int i = 0; i < n_units; ++i)
      if (draw[i] >= design.n0) Yb.row(row++) = Y.row(draw[i]);

    BlockDesign db;
    db.n0 = n0b;
    db.n1 = n_units - n0b;
    db.t0 = design.t0;
    db.t1 = design.t1;
    result.estimates[b - 1] = estimate_ate(Yb, db, method, opts.solver);
  }

  double mean = 0.0;
  for (double e : result.estimates) mean += e;
  mean /= replicates;
  double ss = 0.0;
  for (double e : result.estimates) ss += (e - mean) * (e - mean);
  result.se = std::sqrt(ss / (replicates - 1));
  return result;
}

AteEstimate attach_inference(const AteEstimate& est, const BootstrapResult& boot) {
  if (boot.method != est.method)
    throw ProvenanceMismatch("attach_inference: estimate is " + to_string(est.method) +
                             " but bootstrap ran " + to_string(boot.method));
  if (boot.n_obs != est.n_obs)
    throw ProvenanceMismatch("attach_inference: panel sizes differ (" +
                             std::to_string(est.n_obs) + " vs " + std::to_string(boot.n_obs) +
                             " observations)");
  AteEstimate out = est;
  out.se = boot.se;
  out.stars = stars_for(out.ate, boot.se);
  return out;
}

}  // namespace panelsynth
