#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panelsynth/errors.hpp"
#include "panelsynth/panel.hpp"

namespace panelsynth {

enum class Metric { Pushes, Repositories, Developers, DevelopersByLanguage };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& name);

struct MetricRecord {
  std::string economy;
  std::string period;
  Metric metric = Metric::Pushes;
  std::optional<std::string> language;  // present iff metric is by-language
  double value = 0.0;
};

// Maps roles onto the data file's column names. metric/language columns are
// optional; rows of a file without a metric column all get default_metric.
struct CsvSchema {
  std::string economy = "economy";
  std::string period = "period";
  std::string value = "value";
  std::string metric;    // empty: no metric column
  std::string language;  // empty: no language column
  Metric default_metric = Metric::Pushes;
};

// "economy=iso2,period=quarter,value=git_pushes[,metric=...][,language=...]"
CsvSchema parse_schema(const std::string& mapping);

struct RejectedRow {
  long line = 0;       // 1-based line in the source file
  std::string reason;
  std::string raw;
};

struct LoadResult {
  std::vector<MetricRecord> records;
  std::vector<RejectedRow> rejects;
};

// Streaming CSV ingest; malformed rows land in rejects rather than being
// silently dropped.
LoadResult load_metrics(const std::string& path, const CsvSchema& schema);

struct FilterEntry {
  std::string economy;
  std::string rule;
};

struct FilterOptions {
  std::vector<std::string> eu_labels = {"EU", "European Union"};
  std::vector<std::string> hong_kong_labels = {"HK", "Hong Kong"};
};

struct FilterResult {
  std::vector<MetricRecord> kept;
  std::vector<FilterEntry> log;  // every dropped economy and why
};

// Restricts records to the [first, last] quarter span, then drops
// (1) economies missing any quarter of the span, (2) the EU aggregate,
// (3) Hong Kong. When both span endpoints are quarter labels the expected
// grid is enumerated from them; otherwise the observed periods in span serve
// as the grid.
FilterResult apply_paper_filters(const std::vector<MetricRecord>& records,
                                 const std::pair<std::string, std::string>& span,
                                 const FilterOptions& opts = {});

struct PopulationTable {
  std::map<std::string, double> population;  // economy -> persons, > 0
};

// Two-column CSV (economy, population) with a header row.
PopulationTable load_population(const std::string& path);

// value' = value / population * 100000.
std::vector<MetricRecord> per_100k(const std::vector<MetricRecord>& records,
                                   const PopulationTable& pop);

struct TreatmentRoster {
  std::vector<std::string> treated_economies;
  std::string treatment_start;
};

// Plain text: one economy per line, '#' comments, plus one
// "treatment_start: <period>" line.
TreatmentRoster load_roster(const std::string& path);

struct PanelBuild {
  Panel panel;
  std::vector<FilterEntry> dropped;  // economies without a complete series
};

// Selects one series per economy for the requested metric (and language, for
// by-language data), drops economies lacking a complete series, builds the
// balanced panel and attaches the roster's treatment metadata.
PanelBuild build_outcome_panel(const std::vector<MetricRecord>& records,
                               const TreatmentRoster& roster, Metric metric,
                               const std::optional<std::string>& language = std::nullopt);

// Small CSV helpers shared with the report writers.
std::string csv_escape(const std::string& field);
std::string format_double(double x);  // shortest round-trip decimal form

}  // namespace panelsynth
