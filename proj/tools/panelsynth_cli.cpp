// Command-line front end: estimate / simulate / bootstrap / report / plot.
// Exit codes: 0 success, 1 estimation error, 2 input/data error,
// 3 convergence failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "panelsynth/dgp.hpp"
#include "panelsynth/report.hpp"

namespace ps = panelsynth;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ps::FileNotFound("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void add_solver_flags(CLI::App* cmd, ps::EstimateArgs& args) {
  cmd->add_option("--tol", args.tol, "solver convergence tolerance");
  cmd->add_option("--max-iter", args.max_iter, "solver iteration cap");
  cmd->add_option("--lambda-ridge", args.lambda_ridge,
                  "optional ridge for the time-weight program");
}

int run_estimate(const ps::EstimateArgs& args) {
  ps::ResultsBundle bundle = ps::cmd_estimate(args);
  std::cout << ps::render_table(bundle, args.coef_label);
  if (!args.out_dir.empty())
    std::cout << "\nwrote results to " << args.out_dir << "/\n";
  return 0;
}

int run_simulate(const ps::DgpSpec& spec, double base, const std::string& out_dir) {
  ps::GeneratedPanel gen = ps::generate_panel(spec);
  const ps::Panel& panel = gen.panel;

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out(out_dir);

  // The ingestion schema holds count-like data (value >= 0), so the zero-mean
  // draws get shifted by a base level; every estimator is invariant to it.
  std::ofstream data(out / "data.csv");
  data << "economy,period,value\n";
  for (const auto& unit : panel.unit_ids())
    for (const auto& period : panel.period_ids())
      data << unit << ',' << period << ','
           << ps::format_double(base + panel.value(unit, period)) << "\n";

  std::ofstream pop(out / "population.csv");
  pop << "economy,population\n";
  for (const auto& unit : panel.unit_ids()) pop << unit << ",100000\n";

  std::ofstream roster(out / "roster.txt");
  roster << "treatment_start: " << panel.treatment_start() << "\n";
  for (const auto& unit : panel.treated_units()) roster << unit << "\n";

  std::cout << "simulated " << panel.n_units() << " units x " << panel.n_periods()
            << " periods (true effect " << ps::format_double(gen.true_ate) << ") into "
            << out_dir << "/\n";
  return 0;
}

int run_bootstrap(const ps::EstimateArgs& args, const std::string& method_name,
                  const std::string& out_file) {
  if (args.metrics.size() != 1)
    throw ps::InputError("bootstrap handles one metric at a time");

  ps::EstimateArgs point = args;
  point.bootstrap_reps = 0;
  point.out_dir.clear();
  point.methods = {method_name};
  ps::ResultsBundle bundle = ps::cmd_estimate(point);

  // Rebuild the panel the same way to run the resampler itself.
  const ps::Method method = ps::method_from_string(method_name);
  const ps::CsvSchema schema =
      args.schema.empty() ? ps::CsvSchema{} : ps::parse_schema(args.schema);
  std::vector<ps::MetricRecord> records;
  for (const auto& file : args.data_files) {
    auto loaded = ps::load_metrics(file, schema);
    records.insert(records.end(), loaded.records.begin(), loaded.records.end());
  }
  const ps::Metric metric = ps::metric_from_string(args.metrics.front());
  std::vector<ps::MetricRecord> subset;
  for (const auto& r : records)
    if (r.metric == metric) subset.push_back(r);
  std::pair<std::string, std::string> span =
      (args.span_first && args.span_last)
          ? std::pair{*args.span_first, *args.span_last}
          : std::pair{subset.front().period, subset.front().period};
  if (!(args.span_first && args.span_last)) {
    for (const auto& r : subset) {
      if (ps::parse_period(r.period) < ps::parse_period(span.first)) span.first = r.period;
      if (ps::parse_period(span.second) < ps::parse_period(r.period)) span.second = r.period;
    }
  }
  auto filtered = ps::apply_paper_filters(subset, span);
  auto normalized = ps::per_100k(filtered.kept, ps::load_population(args.population_file));
  auto built = ps::build_outcome_panel(normalized, ps::load_roster(args.roster_file), metric,
                                       args.language);

  ps::BootstrapOptions opts;
  opts.solver.tol = args.tol;
  opts.solver.max_iter = args.max_iter;
  opts.solver.lambda_ridge = args.lambda_ridge;
  opts.max_redraws = args.max_redraws;
  const ps::BootstrapResult boot =
      ps::bootstrap_se(built.panel, method, args.bootstrap_reps, args.seed, opts);

  json j{{"method", ps::to_string(method)},
         {"se", boot.se},
         {"replicates", boot.replicates},
         {"redraws", boot.redraws},
         {"seed", boot.seed},
         {"ate", bundle.panels.front().methods.front().estimate.ate},
         {"estimates", boot.estimates}};
  if (out_file.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_file);
    if (!out) throw ps::IoError("cannot open " + out_file);
    out << j.dump(2) << "\n";
    std::cout << "se = " << boot.se << " (" << boot.replicates << " replicates) -> "
              << out_file << "\n";
  }
  return 0;
}

int run_report(const std::string& results_file, const std::string& out_file,
               const std::string& coef_label) {
  ps::ResultsBundle bundle = ps::bundle_from_json(read_json_file(results_file));
  const std::string table = ps::render_table(bundle, coef_label);
  if (out_file.empty()) {
    std::cout << table;
  } else {
    std::ofstream out(out_file);
    if (!out) throw ps::IoError("cannot open " + out_file);
    out << table;
  }
  return 0;
}

int run_plot(const std::string& results_file, const std::string& out_dir) {
  ps::ResultsBundle bundle = ps::bundle_from_json(read_json_file(results_file));
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out(out_dir);
  int count = 0;
  for (const auto& p : bundle.panels) {
    std::string base;
    for (char c : ps::to_string(p.metric)) base.push_back(c);
    if (p.language)
      for (char c : *p.language)
        base.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    for (const auto& m : p.methods) {
      const std::string tag = ps::to_string(m.estimate.method);
      ps::PlotMeta meta;
      meta.title = p.outcome + ": " + tag + " trends";
      meta.periods = p.periods;
      meta.treatment_start = p.treatment_start;
      meta.shade_lambda = m.estimate.method == ps::Method::SDID;
      ps::emit_trend_plot(m.trends, meta,
                          (out / ("fig_" + base + "_" + tag + "_trends.svg")).string());
      ps::emit_weight_plot(m.estimate.weights, p.control_units,
                           (out / ("fig_" + base + "_" + tag + "_weights.svg")).string());
      count += 2;
    }
  }
  std::cout << "wrote " << count << " figures to " << out_dir << "/\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panel treatment-effect toolkit: DID, SC and SDID estimators with "
               "clustered bootstrap inference"};
  app.require_subcommand(1);

  ps::EstimateArgs args;
  std::string manifest_file, span_arg, method_name = "did";
  std::string results_file, out_file, plot_dir = "figures";
  ps::DgpSpec dgp;
  double sim_base = 100.0;
  std::string sim_out = "simulated";

  auto add_data_flags = [&](CLI::App* cmd) {
    cmd->add_option("--data", args.data_files, "metric CSV file(s)");
    cmd->add_option("--population", args.population_file, "population CSV (economy,population)");
    cmd->add_option("--roster", args.roster_file, "treated-economy roster file");
    cmd->add_option("--schema", args.schema,
                    "column mapping, e.g. economy=iso2,period=quarter,value=git_pushes");
    cmd->add_option("--metric", args.metrics, "metric(s) to analyze")->delimiter(',');
    cmd->add_option("--language", [&args](const std::vector<std::string>& v) {
          args.language = v.front();
          return true;
        }, "language for developers_by_language panels");
    cmd->add_option("--span", span_arg, "analysis span, e.g. 2020Q1:2023Q1");
  };

  CLI::App* est = app.add_subcommand("estimate", "run the full pipeline and render results");
  add_data_flags(est);
  add_solver_flags(est, args);
  est->add_option("--methods", args.methods, "did,sc,sdid")->delimiter(',');
  est->add_option("--bootstrap-reps", args.bootstrap_reps, "bootstrap replicates (0 = skip)");
  est->add_option("--seed", args.seed, "bootstrap seed");
  est->add_option("--max-redraws", args.max_redraws, "degenerate-resample cap");
  est->add_option("--out", args.out_dir, "output directory");
  est->add_option("--label", args.coef_label, "coefficient row label");
  est->add_option("--manifest", manifest_file, "re-run from a manifest.json");

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic panel as CSV");
  sim->add_option("--n0", dgp.n0, "control units");
  sim->add_option("--n1", dgp.n1, "treated units");
  sim->add_option("--t0", dgp.t0, "pre-treatment periods");
  sim->add_option("--t1", dgp.t1, "post-treatment periods");
  sim->add_option("--effect", dgp.effect, "true additive effect");
  sim->add_option("--n-factors", dgp.n_factors, "latent factors");
  sim->add_option("--factor-scale", dgp.factor_scale, "factor loading scale");
  sim->add_option("--noise-sd", dgp.noise_sd, "idiosyncratic noise sd");
  sim->add_option("--unit-fe-sd", dgp.unit_fe_sd, "unit fixed-effect sd");
  sim->add_option("--time-fe-sd", dgp.time_fe_sd, "time fixed-effect sd");
  sim->add_option("--seed", dgp.seed, "rng seed");
  sim->add_option("--base", sim_base, "level added to every cell (keeps values nonnegative)");
  sim->add_option("--out", sim_out, "output directory");

  CLI::App* boot = app.add_subcommand("bootstrap", "clustered bootstrap for one method");
  add_data_flags(boot);
  add_solver_flags(boot, args);
  boot->add_option("--method", method_name, "did | sc | sdid");
  boot->add_option("--bootstrap-reps", args.bootstrap_reps, "replicates");
  boot->add_option("--seed", args.seed, "seed");
  boot->add_option("--max-redraws", args.max_redraws, "degenerate-resample cap");
  boot->add_option("--out", out_file, "JSON output file (default stdout)");

  CLI::App* rep = app.add_subcommand("report", "render a table from results.json");
  rep->add_option("--results", results_file, "results.json path")->required();
  rep->add_option("--out", out_file, "write table here instead of stdout");
  rep->add_option("--label", args.coef_label, "coefficient row label");

  CLI::App* plt = app.add_subcommand("plot", "emit SVG figures from results.json");
  plt->add_option("--results", results_file, "results.json path")->required();
  plt->add_option("--out", plot_dir, "figure directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (!span_arg.empty()) {
      const auto colon = span_arg.find(':');
      if (colon == std::string::npos)
        throw ps::InputError("--span expects first:last, got " + span_arg);
      args.span_first = span_arg.substr(0, colon);
      args.span_last = span_arg.substr(colon + 1);
    }
    if (est->parsed()) {
      if (!manifest_file.empty()) args = ps::args_from_manifest(read_json_file(manifest_file));
      return run_estimate(args);
    }
    if (sim->parsed()) return run_simulate(dgp, sim_base, sim_out);
    if (boot->parsed()) return run_bootstrap(args, method_name, out_file);
    if (rep->parsed()) return run_report(results_file, out_file, args.coef_label);
    if (plt->parsed()) return run_plot(results_file, plot_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ps::exit_code_for(e);
  }
  return 0;
}
