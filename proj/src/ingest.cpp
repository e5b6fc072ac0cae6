#include "panelsynth/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace panelsynth {

std::string to_string(Metric m) {
  switch (m) {
    case Metric::Pushes: return "pushes";
    case Metric::Repositories: return "repositories";
    case Metric::Developers: return "developers";
    case Metric::DevelopersByLanguage: return "developers_by_language";
  }
  return "?";
}

Metric metric_from_string(const std::string& name) {
  if (name == "pushes") return Metric::Pushes;
  if (name == "repositories") return Metric::Repositories;
  if (name == "developers") return Metric::Developers;
  if (name == "developers_by_language") return Metric::DevelopersByLanguage;
  throw InputError("unknown metric: " + name);
}

CsvSchema parse_schema(const std::string& mapping) {
  CsvSchema schema;
  std::stringstream ss(mapping);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw InputError("schema entry without '=': " + item);
    const std::string role = item.substr(0, eq);
    const std::string column = item.substr(eq + 1);
    if (role == "economy") schema.economy = column;
    else if (role == "period") schema.period = column;
    else if (role == "value") schema.value = column;
    else if (role == "metric") schema.metric = column;
    else if (role == "language") schema.language = column;
    else throw InputError("unknown schema role: " + role);
  }
  return schema;
}

namespace {

struct CsvRow {
  long line = 0;
  std::vector<std::string> fields;
};

struct CsvFile {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

// RFC-4180-ish: quoted fields, "" escapes, newlines inside quotes, CRLF.
CsvFile read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open " + path);

  CsvFile file;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_started = false;
  long line = 1;
  long row_line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    if (!row_started && row.empty()) return;
    end_field();
    if (file.header.empty())
      file.header = std::move(row);
    else
      file.rows.push_back({row_line, std::move(row)});
    row.clear();
    row_started = false;
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_started = true;
        break;
      case ',':
        end_field();
        row_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_started || !field.empty() || !row.empty()) end_row();
        ++line;
        row_line = line;
        break;
      default:
        field.push_back(c);
        row_started = true;
        break;
    }
  }
  if (row_started || !field.empty() || !row.empty()) end_row();
  return file;
}

int column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

bool parse_value(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && p == end;
}

std::string join_fields(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_escape(fields[i]);
  }
  return out;
}

bool label_in(const std::string& label, const std::vector<std::string>& list) {
  return std::find(list.begin(), list.end(), label) != list.end();
}

}  // namespace

LoadResult load_metrics(const std::string& path, const CsvSchema& schema) {
  const CsvFile file = read_csv(path);
  if (file.header.empty()) throw NoValidRows("no header row in " + path);

  const int i_economy = column_index(file.header, schema.economy);
  const int i_period = column_index(file.header, schema.period);
  const int i_value = column_index(file.header, schema.value);
  const int i_metric = schema.metric.empty() ? -2 : column_index(file.header, schema.metric);
  const int i_language =
      schema.language.empty() ? -2 : column_index(file.header, schema.language);

  std::vector<std::string> missing;
  if (i_economy < 0) missing.push_back(schema.economy);
  if (i_period < 0) missing.push_back(schema.period);
  if (i_value < 0) missing.push_back(schema.value);
  if (i_metric == -1) missing.push_back(schema.metric);
  if (i_language == -1) missing.push_back(schema.language);
  if (!missing.empty()) {
    std::string msg = path + ": missing column(s):";
    for (const auto& c : missing) msg += " " + c;
    throw SchemaMismatch(msg, missing);
  }

  const int max_needed = std::max({i_economy, i_period, i_value, i_metric, i_language});

  LoadResult out;
  for (const auto& row : file.rows) {
    auto reject = [&](const std::string& reason) {
      out.rejects.push_back({row.line, reason, join_fields(row.fields)});
    };
    if (static_cast<int>(row.fields.size()) <= max_needed) {
      reject("too few fields");
      continue;
    }

    MetricRecord rec;
    rec.economy = row.fields[i_economy];
    rec.period = row.fields[i_period];
    if (rec.economy.empty()) {
      reject("missing economy");
      continue;
    }
    if (rec.period.empty()) {
      reject("missing period");
      continue;
    }
    if (!parse_value(row.fields[i_value], rec.value)) {
      reject("unparseable value");
      continue;
    }
    if (rec.value < 0) {
      reject("negative value");
      continue;
    }

    if (i_metric >= 0) {
      try {
        rec.metric = metric_from_string(row.fields[i_metric]);
      } catch (const InputError&) {
        reject("unknown metric");
        continue;
      }
    } else {
      rec.metric = schema.default_metric;
    }

    const std::string language = i_language >= 0 ? row.fields[i_language] : std::string();
    if (rec.metric == Metric::DevelopersByLanguage) {
      if (language.empty()) {
        reject("missing language");
        continue;
      }
      rec.language = language;
    } else if (!language.empty()) {
      reject("unexpected language");
      continue;
    }
    out.records.push_back(std::move(rec));
  }

  if (out.records.empty()) throw NoValidRows("no valid rows in " + path);
  return out;
}

FilterResult apply_paper_filters(const std::vector<MetricRecord>& records,
                                 const std::pair<std::string, std::string>& span,
                                 const FilterOptions& opts) {
  const PeriodKey first = parse_period(span.first);
  const PeriodKey last = parse_period(span.second);
  if (last < first) throw InputError("filter span is reversed: " + span.first + " after " +
                                     span.second);

  auto in_span = [&](const std::string& period) {
    const PeriodKey k = parse_period(period);
    return !(k < first) && !(last < k);
  };

  // Expected period grid: enumerate quarters when the span is quarters,
  // otherwise the union of observed in-span periods.
  std::set<std::string> grid;
  if (first.is_quarter && last.is_quarter) {
    std::string q = span.first;
    while (true) {
      grid.insert(q);
      if (q == span.second) break;
      q = next_quarter(q);
    }
  } else {
    for (const auto& r : records)
      if (in_span(r.period)) grid.insert(r.period);
  }

  // Per-economy coverage, economies in first-appearance order.
  std::vector<std::string> economies;
  std::unordered_map<std::string, std::set<std::string>> covered;
  for (const auto& r : records) {
    if (covered.find(r.economy) == covered.end()) economies.push_back(r.economy);
    if (in_span(r.period) && grid.count(r.period)) covered[r.economy].insert(r.period);
    else covered.try_emplace(r.economy);
  }

  FilterResult out;
  std::unordered_set<std::string> dropped;
  for (const auto& economy : economies) {
    if (covered[economy].size() < grid.size()) {
      std::string missing_one;
      for (const auto& p : grid)
        if (!covered[economy].count(p)) {
          missing_one = p;
          break;
        }
      out.log.push_back({economy, "incomplete series (missing " + missing_one + ")"});
      dropped.insert(economy);
    } else if (label_in(economy, opts.eu_labels)) {
      out.log.push_back({economy, "EU aggregate (collinear with member economies)"});
      dropped.insert(economy);
    } else if (label_in(economy, opts.hong_kong_labels)) {
      out.log.push_back({economy, "Hong Kong (atypically high activity level)"});
      dropped.insert(economy);
    }
  }

  for (const auto& r : records)
    if (!dropped.count(r.economy) && in_span(r.period) && grid.count(r.period))
      out.kept.push_back(r);

  if (out.kept.empty()) throw EmptyAfterFilters("no records survive the filters");
  return out;
}

PopulationTable load_population(const std::string& path) {
  const CsvFile file = read_csv(path);
  if (file.header.size() < 2)
    throw SchemaMismatch(path + ": population file needs (economy, population) columns",
                         {"economy", "population"});
  PopulationTable table;
  for (const auto& row : file.rows) {
    if (row.fields.size() < 2) continue;
    double pop = 0.0;
    if (!parse_value(row.fields[1], pop) || !(pop > 0))
      throw InputError(path + ":" + std::to_string(row.line) +
                       ": population must be a positive number, got '" + row.fields[1] + "'");
    table.population[row.fields[0]] = pop;
  }
  if (table.population.empty()) throw NoValidRows("no population rows in " + path);
  return table;
}

std::vector<MetricRecord> per_100k(const std::vector<MetricRecord>& records,
                                   const PopulationTable& pop) {
  std::vector<std::string> missing;
  std::unordered_set<std::string> seen;
  for (const auto& r : records)
    if (!pop.population.count(r.economy) && seen.insert(r.economy).second)
      missing.push_back(r.economy);
  if (!missing.empty()) {
    std::string msg = "no population for:";
    for (const auto& e : missing) msg += " " + e;
    throw MissingPopulation(msg, missing);
  }

  std::vector<MetricRecord> out = records;
  for (auto& r : out) r.value = r.value / pop.population.at(r.economy) * 100000.0;
  return out;
}

TreatmentRoster load_roster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("cannot open " + path);

  TreatmentRoster roster;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t");
    line = line.substr(start, end - start + 1);
    if (line.empty() || line[0] == '#') continue;

    const std::string key = "treatment_start:";
    if (line.rfind(key, 0) == 0) {
      std::string value = line.substr(key.size());
      const auto vs = value.find_first_not_of(" \t");
      roster.treatment_start = vs == std::string::npos ? "" : value.substr(vs);
    } else {
      roster.treated_economies.push_back(line);
    }
  }
  if (roster.treated_economies.empty())
    throw InputError(path + ": roster lists no treated economies");
  if (roster.treatment_start.empty())
    throw InputError(path + ": roster has no 'treatment_start:' line");
  return roster;
}

PanelBuild build_outcome_panel(const std::vector<MetricRecord>& records,
                               const TreatmentRoster& roster, Metric metric,
                               const std::optional<std::string>& language) {
  std::vector<const MetricRecord*> selected;
  for (const auto& r : records) {
    if (r.metric != metric) continue;
    if (metric == Metric::DevelopersByLanguage) {
      if (!language) throw InputError("build_outcome_panel: by-language metric needs a language");
      if (!r.language || *r.language != *language) continue;
    }
    selected.push_back(&r);
  }
  if (selected.empty())
    throw EmptyInput("build_outcome_panel: no records for metric " + to_string(metric) +
                     (language ? " language " + *language : ""));

  // Period grid for this series; economies missing any of it get dropped.
  std::set<std::string> grid;
  for (const auto* r : selected) grid.insert(r->period);

  std::vector<std::string> economies;
  std::unordered_map<std::string, size_t> count;
  for (const auto* r : selected) {
    if (count.find(r->economy) == count.end()) economies.push_back(r->economy);
    ++count[r->economy];
  }

  std::vector<FilterEntry> dropped_log;
  std::unordered_set<std::string> dropped;
  for (const auto& e : economies)
    if (count[e] < grid.size()) {
      dropped_log.push_back(
          {e, "incomplete series" + (language ? " for " + *language : std::string())});
      dropped.insert(e);
    }

  std::vector<PanelRecord> rows;
  rows.reserve(selected.size());
  for (const auto* r : selected)
    if (!dropped.count(r->economy)) rows.push_back({r->economy, r->period, r->value});

  PanelBuild out{Panel::build(rows), std::move(dropped_log)};
  std::vector<std::string> treated;
  for (const auto& e : roster.treated_economies)
    if (out.panel.unit_index(e) >= 0) treated.push_back(e);
  if (treated.empty())
    throw NoTreated("build_outcome_panel: no roster economy present in the panel");
  out.panel.set_treatment(treated, roster.treatment_start);
  return out;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", x);
  // Trim to the shortest representation that still round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, x);
    double back = 0.0;
    if (parse_value(shorter, back) && back == x) return shorter;
  }
  return std::string(buf, static_cast<size_t>(len));
}

}  // namespace panelsynth
