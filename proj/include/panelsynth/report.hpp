#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "panelsynth/estimator.hpp"
#include "panelsynth/inference.hpp"
#include "panelsynth/ingest.hpp"

namespace panelsynth {

struct BootstrapMeta {
  int replicates = 0;
  long redraws = 0;
  std::uint64_t seed = 0;
};

struct MethodResult {
  AteEstimate estimate;
  TrendSeries trends;
  std::optional<BootstrapMeta> bootstrap;
};

struct PanelResults {
  std::string outcome;  // table caption, e.g. "pushes per 100k"
  Metric metric = Metric::Pushes;
  std::optional<std::string> language;
  int n0 = 0, n1 = 0, t0 = 0, t1 = 0;
  std::vector<std::string> periods;
  std::string treatment_start;
  std::vector<std::string> control_units;  // block order, for weight plots
  std::vector<MethodResult> methods;
};

// Everything cmd_estimate produced, plus the manifest that reproduces it.
struct ResultsBundle {
  nlohmann::json manifest;
  std::vector<PanelResults> panels;
};

struct EstimateArgs {
  std::vector<std::string> data_files;
  std::string population_file;
  std::string roster_file;
  std::vector<std::string> metrics = {"pushes"};
  std::optional<std::string> language;
  std::vector<std::string> methods = {"did", "sc", "sdid"};
  std::string schema;               // empty: default column names
  std::optional<std::string> span_first, span_last;  // default: data range
  double tol = 1e-10;
  int max_iter = 10000;
  double lambda_ridge = 0.0;
  int bootstrap_reps = 1000;        // 0 disables inference
  std::uint64_t seed = 42;
  long max_redraws = -1;
  std::string out_dir;              // empty: do not write files
  std::string coef_label = "Treatment";
};

// Full pipeline: ingest -> filters -> per-100k -> panel -> estimate ->
// bootstrap, for every requested (metric, method) pair. Writes results.json,
// manifest.json, table.txt, filter/reject logs and figure files into out_dir
// when set.
ResultsBundle cmd_estimate(const EstimateArgs& args);

// Reconstructs the args a manifest was produced from, so a bundle can be
// re-run bit-identically.
EstimateArgs args_from_manifest(const nlohmann::json& manifest);

nlohmann::json bundle_to_json(const ResultsBundle& bundle);
ResultsBundle bundle_from_json(const nlohmann::json& j);

// Paper-style panel table: one column per method, coefficient with stars,
// standard error in parentheses, observation count, baseline mean.
std::string render_table(const ResultsBundle& bundle, const std::string& coef_label = "Treatment");

struct PlotMeta {
  std::string title;
  std::vector<std::string> periods;
  std::string treatment_start;
  bool shade_lambda = false;
};

// SVG line chart of treated vs synthetic paths plus a companion CSV with the
// exact plotted numbers (same basename, .csv extension).
void emit_trend_plot(const TrendSeries& series, const PlotMeta& meta, const std::string& path);

// SVG chart of control weights sorted descending (flat line for uniform DiD
// weights), with companion CSV.
void emit_weight_plot(const WeightSet& w, const std::vector<std::string>& unit_labels,
                      const std::string& path);

// Formatting helpers shared by table and CSV output.
std::string fmt_fixed3(double x);   // 899.268
std::string fmt_sig4(double x);     // 741.5
std::string star_suffix(int stars);
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace panelsynth
