#include "panelsynth/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace panelsynth {

namespace {

using nlohmann::json;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

json vec_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vec_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

std::string sanitize_token(const std::string& s) {
  std::string out;
  for (char c : s)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(
                      static_cast<unsigned char>(c)))
                                                              : '_');
  return out;
}

}  // namespace

std::string fmt_fixed3(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

std::string fmt_sig4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  if (std::string_view(buf).find_first_of("eE") == std::string_view::npos) return buf;
  // Re-expand scientific notation into fixed form at the same 4-figure
  // rounding.
  const double rounded = std::strtod(buf, nullptr);
  const int exponent =
      rounded == 0.0 ? 0 : static_cast<int>(std::floor(std::log10(std::abs(rounded))));
  const int decimals = std::max(0, 3 - exponent);
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

std::string star_suffix(int stars) {
  return std::string(static_cast<size_t>(std::clamp(stars, 0, 3)), '*');
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

json bundle_to_json(const ResultsBundle& bundle) {
  json panels = json::array();
  for (const auto& p : bundle.panels) {
    json methods = json::array();
    for (const auto& m : p.methods) {
      json w{{"omega", vec_to_json(m.estimate.weights.omega)},
             {"omega0", m.estimate.weights.omega0 ? json(*m.estimate.weights.omega0) : json()},
             {"lambda", vec_to_json(m.estimate.weights.lambda)},
             {"lambda0",
              m.estimate.weights.lambda0 ? json(*m.estimate.weights.lambda0) : json()}};
      json trends{{"treated_path", vec_to_json(m.trends.treated_path)},
                  {"synthetic_path", vec_to_json(m.trends.synthetic_path)},
                  {"lambda_profile", vec_to_json(m.trends.lambda_profile)}};
      json boot;
      if (m.bootstrap)
        boot = json{{"replicates", m.bootstrap->replicates},
                    {"redraws", m.bootstrap->redraws},
                    {"seed", m.bootstrap->seed}};
      methods.push_back(json{{"method", to_string(m.estimate.method)},
                             {"ate", m.estimate.ate},
                             {"se", m.estimate.se ? json(*m.estimate.se) : json()},
                             {"stars", m.estimate.stars},
                             {"baseline_mean", m.estimate.baseline_mean},
                             {"n_obs", m.estimate.n_obs},
                             {"weights", std::move(w)},
                             {"trends", std::move(trends)},
                             {"bootstrap", std::move(boot)}});
    }
    panels.push_back(json{{"outcome", p.outcome},
                          {"metric", to_string(p.metric)},
                          {"language", p.language ? json(*p.language) : json()},
                          {"n0", p.n0},
                          {"n1", p.n1},
                          {"t0", p.t0},
                          {"t1", p.t1},
                          {"periods", p.periods},
                          {"treatment_start", p.treatment_start},
                          {"control_units", p.control_units},
                          {"methods", std::move(methods)}});
  }
  return json{{"schema_version", 1}, {"manifest", bundle.manifest}, {"panels", std::move(panels)}};
}

ResultsBundle bundle_from_json(const json& j) {
  ResultsBundle bundle;
  bundle.manifest = j.value("manifest", json::object());
  for (const auto& jp : j.at("panels")) {
    PanelResults p;
    p.outcome = jp.at("outcome").get<std::string>();
    p.metric = metric_from_string(jp.at("metric").get<std::string>());
    if (!jp.at("language").is_null()) p.language = jp.at("language").get<std::string>();
    p.n0 = jp.at("n0").get<int>();
    p.n1 = jp.at("n1").get<int>();
    p.t0 = jp.at("t0").get<int>();
    p.t1 = jp.at("t1").get<int>();
    p.periods = jp.at("periods").get<std::vector<std::string>>();
    p.treatment_start = jp.at("treatment_start").get<std::string>();
    p.control_units = jp.at("control_units").get<std::vector<std::string>>();
    for (const auto& jm : jp.at("methods")) {
      MethodResult m;
      m.estimate.method = method_from_string(jm.at("method").get<std::string>());
      m.estimate.ate = jm.at("ate").get<double>();
      if (!jm.at("se").is_null()) m.estimate.se = jm.at("se").get<double>();
      m.estimate.stars = jm.at("stars").get<int>();
      m.estimate.baseline_mean = jm.at("baseline_mean").get<double>();
      m.estimate.n_obs = jm.at("n_obs").get<long>();
      const auto& jw = jm.at("weights");
      m.estimate.weights.method = m.estimate.method;
      m.estimate.weights.omega = vec_from_json(jw.at("omega"));
      if (!jw.at("omega0").is_null()) m.estimate.weights.omega0 = jw.at("omega0").get<double>();
      m.estimate.weights.lambda = vec_from_json(jw.at("lambda"));
      if (!jw.at("lambda0").is_null())
        m.estimate.weights.lambda0 = jw.at("lambda0").get<double>();
      const auto& jt = jm.at("trends");
      m.trends.treated_path = vec_from_json(jt.at("treated_path"));
      m.trends.synthetic_path = vec_from_json(jt.at("synthetic_path"));
      m.trends.lambda_profile = vec_from_json(jt.at("lambda_profile"));
      if (!jm.at("bootstrap").is_null()) {
        BootstrapMeta meta;
        meta.replicates = jm.at("bootstrap").at("replicates").get<int>();
        meta.redraws = jm.at("bootstrap").at("redraws").get<long>();
        meta.seed = jm.at("bootstrap").at("seed").get<std::uint64_t>();
        m.bootstrap = meta;
      }
      p.methods.push_back(std::move(m));
    }
    bundle.panels.push_back(std::move(p));
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Table rendering
// ---------------------------------------------------------------------------

std::string render_table(const ResultsBundle& bundle, const std::string& coef_label) {
  if (bundle.panels.empty()) throw IncompleteBundle("render_table: bundle has no panels");
  for (const auto& p : bundle.panels)
    if (p.methods.empty())
      throw IncompleteBundle("render_table: panel '" + p.outcome + "' has no estimates");

  const size_t n_cols = bundle.panels.front().methods.size();
  for (const auto& p : bundle.panels)
    if (p.methods.size() != n_cols)
      throw IncompleteBundle("render_table: panels carry different method sets");

  const int label_w = static_cast<int>(
      std::max<size_t>({coef_label.size(), 21 /* Baseline Mean Outcome */, 12}));
  const int cell_w = 14;

  std::ostringstream os;
  auto pad_label = [&](const std::string& s) {
    os << s << std::string(static_cast<size_t>(std::max<int>(0, label_w - static_cast<int>(s.size()))), ' ');
  };
  auto cell = [&](const std::string& s) {
    os << std::string(static_cast<size_t>(std::max<int>(0, cell_w - static_cast<int>(s.size()))), ' ') << s;
  };
  const int total_w = label_w + cell_w * static_cast<int>(n_cols);
  const std::string rule(static_cast<size_t>(total_w), '-');

  pad_label("");
  for (const auto& m : bundle.panels.front().methods) cell(to_string(m.estimate.method));
  os << "\n" << rule << "\n";

  const char panel_letters[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  for (size_t pi = 0; pi < bundle.panels.size(); ++pi) {
    const auto& p = bundle.panels[pi];
    os << "Panel " << panel_letters[pi % 26] << ". " << p.outcome << "\n";

    pad_label(coef_label);
    for (const auto& m : p.methods)
      cell(fmt_fixed3(m.estimate.ate) + star_suffix(m.estimate.stars));
    os << "\n";

    bool any_se = false;
    for (const auto& m : p.methods) any_se = any_se || m.estimate.se.has_value();
    if (any_se) {
      pad_label("");
      for (const auto& m : p.methods)
        cell(m.estimate.se ? "(" + fmt_fixed3(*m.estimate.se) + ")" : "");
      os << "\n";
    }

    pad_label("Observations");
    for (const auto& m : p.methods) cell(std::to_string(m.estimate.n_obs));
    os << "\n";
    pad_label("Baseline Mean Outcome");
    for (const auto& m : p.methods) cell(fmt_sig4(m.estimate.baseline_mean));
    os << "\n";
    os << rule << "\n";
  }
  os << "Robust standard errors.\n";
  os << "* p<.10, ** p<.05, *** p<.01.\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// SVG figures
// ---------------------------------------------------------------------------

namespace {

constexpr int kWidth = 760;
constexpr int kHeight = 460;
constexpr int kLeft = 70, kRight = 24, kTop = 46, kBottom = 64;

double x_pos(int i, int n) {
  if (n <= 1) return kLeft + (kWidth - kLeft - kRight) / 2.0;
  return kLeft + static_cast<double>(i) * (kWidth - kLeft - kRight) / (n - 1);
}

struct YScale {
  double lo = 0.0, hi = 1.0;
  double to_px(double v) const {
    const double span = hi - lo;
    const double f = span > 0 ? (v - lo) / span : 0.5;
    return kHeight - kBottom - f * (kHeight - kTop - kBottom);
  }
};

YScale fit_scale(std::initializer_list<const Eigen::VectorXd*> series) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* v : series)
    for (Eigen::Index i = 0; i < v->size(); ++i) {
      lo = std::min(lo, (*v)[i]);
      hi = std::max(hi, (*v)[i]);
    }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = (hi - lo) * 0.06;
  return {lo - pad, hi + pad};
}

std::string polyline(const Eigen::VectorXd& v, const YScale& ys, const char* stroke,
                     bool dashed) {
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\"";
  if (dashed) os << " stroke-dasharray=\"7 4\"";
  os << " points=\"";
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < n; ++i) {
    if (i) os << ' ';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f,%.2f", x_pos(i, n), ys.to_px(v[i]));
    os << buf;
  }
  os << "\"/>\n";
  return os.str();
}

std::string text_at(double x, double y, const std::string& s, const char* anchor = "middle",
                    int size = 11) {
  std::ostringstream os;
  os << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\""
     << size << "\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
  return os.str();
}

std::string axis_ticks(const YScale& ys, const std::vector<std::string>& periods) {
  std::ostringstream os;
  const int n = static_cast<int>(periods.size());
  const int step = std::max(1, (n + 7) / 8);
  for (int i = 0; i < n; i += step)
    os << text_at(x_pos(i, n), kHeight - kBottom + 18, periods[i]);
  for (int k = 0; k <= 4; ++k) {
    const double v = ys.lo + (ys.hi - ys.lo) * k / 4.0;
    os << text_at(kLeft - 8, ys.to_px(v) + 4, fmt_sig4(v), "end", 10);
    os << "<line x1=\"" << kLeft << "\" y1=\"" << ys.to_px(v) << "\" x2=\"" << kWidth - kRight
       << "\" y2=\"" << ys.to_px(v) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
  }
  return os.str();
}

std::string companion_csv_path(const std::string& svg_path) {
  std::filesystem::path p(svg_path);
  p.replace_extension(".csv");
  return p.string();
}

}  // namespace

void emit_trend_plot(const TrendSeries& series, const PlotMeta& meta, const std::string& path) {
  const int n = static_cast<int>(series.treated_path.size());
  if (static_cast<int>(meta.periods.size()) != n)
    throw DimensionMismatch("emit_trend_plot: periods do not match series length");
  const int t0 = static_cast<int>(series.lambda_profile.size());

  const YScale ys = fit_scale({&series.treated_path, &series.synthetic_path});

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << text_at(kWidth / 2.0, 24, meta.title, "middle", 14);
  svg << axis_ticks(ys, meta.periods);

  // Pre-period importance, shaded under the x axis area.
  if (meta.shade_lambda && t0 > 0) {
    const double lmax = series.lambda_profile.maxCoeff();
    for (int t = 0; t < t0 && t < n; ++t) {
      const double h = lmax > 0 ? 52.0 * series.lambda_profile[t] / lmax : 0.0;
      const double half = (x_pos(1, n) - x_pos(0, n)) * 0.35;
      svg << "<rect x=\"" << x_pos(t, n) - half << "\" y=\"" << kHeight - kBottom - h
          << "\" width=\"" << 2 * half << "\" height=\"" << h
          << "\" fill=\"#9ecae1\" fill-opacity=\"0.5\"/>\n";
    }
  }

  // Treatment start marker.
  int start_idx = -1;
  for (int i = 0; i < n; ++i)
    if (meta.periods[i] == meta.treatment_start) start_idx = i;
  if (start_idx >= 0)
    svg << "<line x1=\"" << x_pos(start_idx, n) << "\" y1=\"" << kTop << "\" x2=\""
        << x_pos(start_idx, n) << "\" y2=\"" << kHeight - kBottom
        << "\" stroke=\"#555555\" stroke-width=\"1.5\" stroke-dasharray=\"4 4\"/>\n";

  svg << polyline(series.treated_path, ys, "#1f3b73", false);
  svg << polyline(series.synthetic_path, ys, "#c0392b", true);
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop - 6 << "\" x2=\"" << kLeft + 26
      << "\" y2=\"" << kTop - 6 << "\" stroke=\"#1f3b73\" stroke-width=\"2\"/>\n";
  svg << text_at(kLeft + 32, kTop - 2, "treated", "start", 11);
  svg << "<line x1=\"" << kLeft + 110 << "\" y1=\"" << kTop - 6 << "\" x2=\"" << kLeft + 136
      << "\" y2=\"" << kTop - 6
      << "\" stroke=\"#c0392b\" stroke-width=\"2\" stroke-dasharray=\"7 4\"/>\n";
  svg << text_at(kLeft + 142, kTop - 2, "synthetic", "start", 11);
  svg << "</svg>\n";
  write_file(path, svg.str());

  std::ostringstream csv;
  csv << "period,treated,synthetic,lambda\n";
  for (int i = 0; i < n; ++i) {
    csv << csv_escape(meta.periods[i]) << ',' << format_double(series.treated_path[i]) << ','
        << format_double(series.synthetic_path[i]) << ',';
    if (i < t0) csv << format_double(series.lambda_profile[i]);
    csv << "\n";
  }
  write_file(companion_csv_path(path), csv.str());
}

void emit_weight_plot(const WeightSet& w, const std::vector<std::string>& unit_labels,
                      const std::string& path) {
  const int n = static_cast<int>(w.omega.size());
  if (static_cast<int>(unit_labels.size()) != n)
    throw DimensionMismatch("emit_weight_plot: labels do not match weight count");

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (w.omega[a] != w.omega[b]) return w.omega[a] > w.omega[b];
    return unit_labels[a] < unit_labels[b];
  });

  const double wmax = std::max(w.omega.maxCoeff(), 1e-12);
  const YScale ys{0.0, wmax * 1.1};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << text_at(kWidth / 2.0, 24, to_string(w.method) + " control weights", "middle", 14);
  for (int k = 0; k <= 4; ++k) {
    const double v = ys.lo + (ys.hi - ys.lo) * k / 4.0;
    svg << text_at(kLeft - 8, ys.to_px(v) + 4, fmt_sig4(v), "end", 10);
  }

  const double plot_w = kWidth - kLeft - kRight;
  const double slot = plot_w / std::max(1, n);
  if (w.method == Method::DID) {
    // Uniform by construction; a flat reference line reads better than bars.
    const double y = ys.to_px(1.0 / std::max(1, n));
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kWidth - kRight
        << "\" y2=\"" << y << "\" stroke=\"#1f3b73\" stroke-width=\"2\"/>\n";
    svg << text_at(kWidth - kRight, y - 6, "1/n0", "end", 11);
  } else {
    for (int r = 0; r < n; ++r) {
      const int i = order[r];
      const double x = kLeft + r * slot + slot * 0.15;
      const double y = ys.to_px(w.omega[i]);
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << slot * 0.7
          << "\" height=\"" << (kHeight - kBottom) - y << "\" fill=\"#1f3b73\"/>\n";
    }
  }
  const int label_step = std::max(1, (n + 15) / 16);
  for (int r = 0; r < n; r += label_step)
    svg << text_at(kLeft + r * slot + slot / 2, kHeight - kBottom + 18, unit_labels[order[r]]);
  svg << "</svg>\n";
  write_file(path, svg.str());

  std::ostringstream csv;
  csv << "unit,weight\n";
  for (int r = 0; r < n; ++r)
    csv << csv_escape(unit_labels[order[r]]) << ',' << format_double(w.omega[order[r]]) << "\n";
  write_file(companion_csv_path(path), csv.str());
}

// ---------------------------------------------------------------------------
// cmd_estimate
// ---------------------------------------------------------------------------

namespace {

struct FileReject {
  std::string file;
  RejectedRow row;
};

std::string default_outcome_label(Metric metric, const std::optional<std::string>& language) {
  if (metric == Metric::DevelopersByLanguage && language)
    return *language + " developers per 100k";
  return to_string(metric) + " per 100k";
}

std::pair<std::string, std::string> data_span(const std::vector<MetricRecord>& records) {
  if (records.empty()) throw EmptyInput("no records to take a span from");
  std::string lo = records.front().period, hi = records.front().period;
  for (const auto& r : records) {
    if (parse_period(r.period) < parse_period(lo)) lo = r.period;
    if (parse_period(hi) < parse_period(r.period)) hi = r.period;
  }
  return {lo, hi};
}

}  // namespace

EstimateArgs args_from_manifest(const json& m) {
  EstimateArgs a;
  a.data_files = m.at("data").get<std::vector<std::string>>();
  a.population_file = m.at("population").get<std::string>();
  a.roster_file = m.at("roster").get<std::string>();
  a.metrics = m.at("metrics").get<std::vector<std::string>>();
  if (!m.at("language").is_null()) a.language = m.at("language").get<std::string>();
  a.methods = m.at("methods").get<std::vector<std::string>>();
  a.schema = m.at("schema").get<std::string>();
  if (!m.at("span").is_null()) {
    a.span_first = m.at("span").at(0).get<std::string>();
    a.span_last = m.at("span").at(1).get<std::string>();
  }
  a.tol = m.at("tol").get<double>();
  a.max_iter = m.at("max_iter").get<int>();
  a.lambda_ridge = m.at("lambda_ridge").get<double>();
  a.bootstrap_reps = m.at("bootstrap_reps").get<int>();
  a.seed = m.at("seed").get<std::uint64_t>();
  a.max_redraws = m.at("max_redraws").get<long>();
  a.out_dir = m.at("out").get<std::string>();
  a.coef_label = m.at("coef_label").get<std::string>();
  return a;
}

ResultsBundle cmd_estimate(const EstimateArgs& args) {
  if (args.data_files.empty()) throw InputError("no data file given");
  if (args.population_file.empty()) throw InputError("no population file given");
  if (args.roster_file.empty()) throw InputError("no roster file given");
  if (args.metrics.empty()) throw InputError("no metric requested");
  if (args.methods.empty()) throw InputError("no method requested");

  const CsvSchema schema = args.schema.empty() ? CsvSchema{} : parse_schema(args.schema);

  std::vector<MetricRecord> records;
  std::vector<FileReject> rejects;
  for (const auto& file : args.data_files) {
    LoadResult loaded = load_metrics(file, schema);
    records.insert(records.end(), loaded.records.begin(), loaded.records.end());
    for (auto& r : loaded.rejects) rejects.push_back({file, std::move(r)});
  }

  const PopulationTable pop = load_population(args.population_file);
  const TreatmentRoster roster = load_roster(args.roster_file);

  std::vector<Method> methods;
  for (const auto& name : args.methods) {
    const Method m = method_from_string(name);
    if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
  }

  SolverOptions solver;
  solver.tol = args.tol;
  solver.max_iter = args.max_iter;
  solver.lambda_ridge = args.lambda_ridge;
  BootstrapOptions boot_opts;
  boot_opts.solver = solver;
  boot_opts.max_redraws = args.max_redraws;

  ResultsBundle bundle;
  std::ostringstream filter_log_csv;
  filter_log_csv << "metric,economy,rule\n";

  for (const auto& metric_name : args.metrics) {
    const Metric metric = metric_from_string(metric_name);
    std::optional<std::string> language;
    if (metric == Metric::DevelopersByLanguage) {
      if (!args.language) throw InputError("metric " + metric_name + " needs --language");
      language = args.language;
    }

    std::vector<MetricRecord> subset;
    for (const auto& r : records)
      if (r.metric == metric) subset.push_back(r);
    if (subset.empty()) throw EmptyInput("no records for metric " + metric_name);

    std::pair<std::string, std::string> span =
        (args.span_first && args.span_last)
            ? std::pair{*args.span_first, *args.span_last}
            : data_span(subset);

    FilterResult filtered = apply_paper_filters(subset, span);
    for (const auto& e : filtered.log)
      filter_log_csv << metric_name << ',' << csv_escape(e.economy) << ','
                     << csv_escape(e.rule) << "\n";

    const std::vector<MetricRecord> normalized = per_100k(filtered.kept, pop);
    PanelBuild built = build_outcome_panel(normalized, roster, metric, language);
    for (const auto& e : built.dropped)
      filter_log_csv << metric_name << ',' << csv_escape(e.economy) << ','
                     << csv_escape(e.rule) << "\n";

    const BlockDesign design = to_block(built.panel);
    const Eigen::MatrixXd Y = block_matrix(built.panel, design);

    PanelResults pr;
    pr.outcome = default_outcome_label(metric, language);
    pr.metric = metric;
    pr.language = language;
    pr.n0 = design.n0;
    pr.n1 = design.n1;
    pr.t0 = design.t0;
    pr.t1 = design.t1;
    pr.periods = built.panel.period_ids();
    pr.treatment_start = built.panel.treatment_start();
    pr.control_units = control_labels(built.panel, design);

    for (Method method : methods) {
      MethodResult mr;
      mr.estimate = estimate(built.panel, method, solver);
      if (args.bootstrap_reps > 0) {
        const BootstrapResult boot =
            bootstrap_se(built.panel, method, args.bootstrap_reps, args.seed, boot_opts);
        mr.estimate = attach_inference(mr.estimate, boot);
        mr.bootstrap = BootstrapMeta{boot.replicates, boot.redraws, boot.seed};
      }
      mr.trends = trend_series(Y, design, mr.estimate.weights);
      pr.methods.push_back(std::move(mr));
    }
    bundle.panels.push_back(std::move(pr));
  }

  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(fnv1a64(filter_log_csv.str())));

  bundle.manifest = json{
      {"data", args.data_files},
      {"population", args.population_file},
      {"roster", args.roster_file},
      {"metrics", args.metrics},
      {"language", args.language ? json(*args.language) : json()},
      {"methods", args.methods},
      {"schema", args.schema},
      {"span", (args.span_first && args.span_last)
                   ? json::array({*args.span_first, *args.span_last})
                   : json()},
      {"tol", args.tol},
      {"max_iter", args.max_iter},
      {"lambda_ridge", args.lambda_ridge},
      {"bootstrap_reps", args.bootstrap_reps},
      {"seed", args.seed},
      {"max_redraws", args.max_redraws},
      {"out", args.out_dir},
      {"coef_label", args.coef_label},
      {"filter_log_digest", digest},
  };

  if (!args.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(args.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + args.out_dir);
    const std::filesystem::path out(args.out_dir);

    write_file((out / "results.json").string(), bundle_to_json(bundle).dump(2) + "\n");
    write_file((out / "manifest.json").string(), bundle.manifest.dump(2) + "\n");
    write_file((out / "table.txt").string(), render_table(bundle, args.coef_label));
    write_file((out / "filter_log.csv").string(), filter_log_csv.str());

    std::ostringstream rejects_csv;
    rejects_csv << "file,line,reason,raw\n";
    for (const auto& r : rejects)
      rejects_csv << csv_escape(r.file) << ',' << r.row.line << ',' << csv_escape(r.row.reason)
                  << ',' << csv_escape(r.row.raw) << "\n";
    write_file((out / "rejects.csv").string(), rejects_csv.str());

    for (const auto& p : bundle.panels) {
      std::string base = sanitize_token(to_string(p.metric));
      if (p.language) base += "_" + sanitize_token(*p.language);
      for (const auto& m : p.methods) {
        const std::string tag = sanitize_token(to_string(m.estimate.method));
        PlotMeta meta;
        meta.title = p.outcome + ": " + to_string(m.estimate.method) + " trends";
        meta.periods = p.periods;
        meta.treatment_start = p.treatment_start;
        meta.shade_lambda = m.estimate.method == Method::SDID;
        emit_trend_plot(m.trends, meta,
                        (out / ("fig_" + base + "_" + tag + "_trends.svg")).string());
        emit_weight_plot(m.estimate.weights, p.control_units,
                         (out / ("fig_" + base + "_" + tag + "_weights.svg")).string());
      }
    }
  }
  return bundle;
}

}  // namespace panelsynth
