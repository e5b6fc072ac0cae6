#pragma once

#include <cstdint>
#include <vector>

#include "panelsynth/estimator.hpp"
#include "panelsynth/panel.hpp"

namespace panelsynth {

struct BootstrapOptions {
  long max_redraws = -1;  // negative: use the default 100*B
  SolverOptions solver;
};

struct BootstrapResult {
  double se = 0.0;
  int replicates = 0;
  std::vector<double> estimates;  // one ATE per replicate, by replicate index
  long redraws = 0;               // degenerate resamples discarded
  std::uint64_t seed = 0;
  // Provenance, checked by attach_inference.
  Method method = Method::DID;
  long n_obs = 0;
};

// Clustered (unit-level) bootstrap: each replicate draws N units with
// replacement, keeps their full series and treatment status, redraws when a
// block ends up empty, and re-runs the whole estimation pipeline. Replicate
// b derives its randomness from (seed, b) alone, so results do not depend on
// execution order. se is the sample standard deviation (divisor B-1).
BootstrapResult bootstrap_se(const Panel& panel, Method method, int replicates,
                             std::uint64_t seed, const BootstrapOptions& opts = {});

// Copies the estimate with se and stars filled in.
AteEstimate attach_inference(const AteEstimate& est, const BootstrapResult& boot);

}  // namespace panelsynth
