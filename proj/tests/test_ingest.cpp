#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "panelsynth/ingest.hpp"
#include "test_helpers.hpp"

using namespace panelsynth;

namespace {

struct TempFile {
  std::filesystem::path path;
  explicit TempFile(const std::string& name, const std::string& content) {
    path = std::filesystem::temp_directory_path() / ("panelsynth_test_" + name);
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
  std::string str() const { return path.string(); }
};

std::vector<MetricRecord> grid_records(const std::vector<std::string>& economies,
                                       const std::vector<std::string>& periods,
                                       double base = 10.0) {
  std::vector<MetricRecord> out;
  for (const auto& e : economies)
    for (const auto& p : periods)
      out.push_back({e, p, Metric::Pushes, std::nullopt, base});
  return out;
}

}  // namespace

TEST_CASE("load_metrics parses a well-formed file") {
  TempFile f("ok.csv",
             "economy,period,value\n"
             "DE,2020Q1,5\n"
             "DE,2020Q2,6\n"
             "FR,2020Q1,7\n");
  LoadResult r = load_metrics(f.str(), CsvSchema{});
  REQUIRE(r.records.size() == 3);
  CHECK(r.rejects.empty());
  CHECK(r.records[0].economy == "DE");
  CHECK(r.records[2].value == 7.0);
  CHECK(r.records[0].metric == Metric::Pushes);
}

TEST_CASE("load_metrics honors a schema mapping and quoted fields") {
  TempFile f("schema.csv",
             "iso2,quarter,git_pushes,extra\n"
             "\"DE\",2020Q1,5,x\n"
             "\"Korea, Rep.\",2020Q1,9,y\n");
  CsvSchema schema = parse_schema("economy=iso2,period=quarter,value=git_pushes");
  LoadResult r = load_metrics(f.str(), schema);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[1].economy == "Korea, Rep.");
}

TEST_CASE("load_metrics collects malformed rows as rejects") {
  TempFile f("bad.csv",
             "economy,period,value\n"
             "DE,2020Q1,5\n"
             "FR,2020Q1,-3\n"
             "IT,2020Q1,abc\n"
             ",2020Q1,4\n");
  LoadResult r = load_metrics(f.str(), CsvSchema{});
  CHECK(r.records.size() == 1);
  REQUIRE(r.rejects.size() == 3);
  CHECK(r.rejects[0].reason == "negative value");
  CHECK(r.rejects[1].reason == "unparseable value");
  CHECK(r.rejects[2].reason == "missing economy");
  CHECK(r.rejects[0].line == 3);
}

TEST_CASE("load_metrics reports missing columns and missing files") {
  TempFile f("cols.csv", "economy,period\nDE,2020Q1\n");
  try {
    load_metrics(f.str(), CsvSchema{});
    FAIL("expected SchemaMismatch");
  } catch (const SchemaMismatch& e) {
    REQUIRE(e.missing.size() == 1);
    CHECK(e.missing[0] == "value");
  }
  CHECK_THROWS_AS(load_metrics("/nonexistent/file.csv", CsvSchema{}), FileNotFound);

  TempFile g("allbad.csv", "economy,period,value\nDE,2020Q1,-1\n");
  CHECK_THROWS_AS(load_metrics(g.str(), CsvSchema{}), NoValidRows);
}

TEST_CASE("by-language records require a language") {
  TempFile f("lang.csv",
             "economy,period,metric,language,value\n"
             "DE,2020Q1,developers_by_language,Python,5\n"
             "FR,2020Q1,developers_by_language,,6\n"
             "IT,2020Q1,pushes,Rust,7\n");
  CsvSchema schema;
  schema.metric = "metric";
  schema.language = "language";
  LoadResult r = load_metrics(f.str(), schema);
  REQUIRE(r.records.size() == 1);
  CHECK(*r.records[0].language == "Python");
  REQUIRE(r.rejects.size() == 2);
  CHECK(r.rejects[0].reason == "missing language");
  CHECK(r.rejects[1].reason == "unexpected language");
}

TEST_CASE("apply_paper_filters drops incomplete economies, the EU aggregate and Hong Kong") {
  std::vector<std::string> quarters = {"2020Q1", "2020Q2", "2020Q3"};
  auto records = grid_records({"DE", "FR", "EU", "HK", "XX"}, quarters);
  // XX loses one quarter
  std::erase_if(records, [](const MetricRecord& r) {
    return r.economy == "XX" && r.period == "2020Q2";
  });

  FilterResult out = apply_paper_filters(records, {"2020Q1", "2020Q3"});
  REQUIRE(out.log.size() == 3);
  CHECK(out.log[0].economy == "XX");
  CHECK(out.log[0].rule.find("incomplete") != std::string::npos);
  CHECK(out.log[0].rule.find("2020Q2") != std::string::npos);
  CHECK(out.log[1].economy == "EU");
  CHECK(out.log[1].rule.find("EU aggregate") != std::string::npos);
  CHECK(out.log[2].economy == "HK");
  CHECK(out.log[2].rule.find("Hong Kong") != std::string::npos);

  // kept set holds exactly DE and FR over the full grid
  CHECK(out.kept.size() == 6);

  // idempotence
  FilterResult again = apply_paper_filters(out.kept, {"2020Q1", "2020Q3"});
  CHECK(again.log.empty());
  CHECK(again.kept.size() == out.kept.size());
}

TEST_CASE("filter log plus kept set partition the input economies") {
  std::vector<std::string> quarters = {"2020Q1", "2020Q2"};
  auto records = grid_records({"A", "B", "EU", "C"}, quarters);
  std::erase_if(records, [](const MetricRecord& r) {
    return r.economy == "C" && r.period == "2020Q1";
  });
  FilterResult out = apply_paper_filters(records, {"2020Q1", "2020Q2"});

  std::set<std::string> kept_economies, dropped;
  for (const auto& r : out.kept) kept_economies.insert(r.economy);
  for (const auto& e : out.log) dropped.insert(e.economy);
  CHECK(kept_economies.size() + dropped.size() == 4);
  for (const auto& e : dropped) CHECK(kept_economies.count(e) == 0);
}

TEST_CASE("per_100k normalizes against the population table") {
  PopulationTable pop;
  pop.population["DE"] = 1000000;
  pop.population["FR"] = 100000;
  std::vector<MetricRecord> records = {{"DE", "2020Q1", Metric::Pushes, std::nullopt, 500},
                                       {"FR", "2020Q1", Metric::Pushes, std::nullopt, 42}};
  auto out = per_100k(records, pop);
  CHECK(out[0].value == doctest::Approx(50.0).epsilon(1e-14));
  CHECK(out[1].value == 42.0);  // identity denominator

  std::vector<MetricRecord> unknown = {{"ZZ", "2020Q1", Metric::Pushes, std::nullopt, 1}};
  try {
    per_100k(unknown, pop);
    FAIL("expected MissingPopulation");
  } catch (const MissingPopulation& e) {
    REQUIRE(e.economies.size() == 1);
    CHECK(e.economies[0] == "ZZ");
  }
}

TEST_CASE("per_100k over a 13-quarter series matches independent arithmetic") {
  PopulationTable pop;
  pop.population["DE"] = 83200000;
  std::vector<std::string> quarters;
  std::string q = "2020Q1";
  for (int t = 0; t < 13; ++t) {
    quarters.push_back(q);
    q = next_quarter(q);
  }
  std::vector<MetricRecord> records;
  for (int t = 0; t < 13; ++t)
    records.push_back({"DE", quarters[t], Metric::Pushes, std::nullopt, 1000.0 * (t + 1)});
  auto out = per_100k(records, pop);
  REQUIRE(out.size() == 13);
  for (int t = 0; t < 13; ++t) {
    const double expected = 1000.0 * (t + 1) / 83200000.0 * 100000.0;
    CHECK(out[t].value == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("normalization commutes with panel building") {
  std::mt19937_64 rng(7);
  std::vector<std::string> quarters = {"2020Q1", "2020Q2", "2020Q3", "2020Q4"};
  std::vector<std::string> economies = {"A", "B", "C"};
  PopulationTable pop;
  pop.population["A"] = 250000;
  pop.population["B"] = 1000000;
  pop.population["C"] = 50000;
  std::vector<MetricRecord> records;
  for (const auto& e : economies)
    for (const auto& p : quarters)
      records.push_back({e, p, Metric::Pushes, std::nullopt, test_util::rand_unif(rng, 1, 100)});

  TreatmentRoster roster{{"C"}, "2020Q3"};
  Panel normalized_first = build_outcome_panel(per_100k(records, pop), roster,
                                               Metric::Pushes).panel;
  Panel built_first = build_outcome_panel(records, roster, Metric::Pushes).panel;
  Eigen::MatrixXd cellwise = built_first.outcomes();
  for (int i = 0; i < cellwise.rows(); ++i)
    cellwise.row(i) *= 100000.0 / pop.population[built_first.unit_ids()[i]];
  CHECK((normalized_first.outcomes() - cellwise).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("build_outcome_panel drops economies without a complete language series") {
  std::vector<MetricRecord> records;
  std::vector<std::string> quarters = {"2020Q1", "2020Q2"};
  for (const auto& e : {"A", "B", "C"})
    for (const auto& p : quarters)
      records.push_back({e, p, Metric::DevelopersByLanguage, std::string("Python"), 2.0});
  // Rust: complete for A and B only
  for (const auto& p : quarters) {
    records.push_back({"A", p, Metric::DevelopersByLanguage, std::string("Rust"), 1.0});
    records.push_back({"B", p, Metric::DevelopersByLanguage, std::string("Rust"), 1.0});
  }
  records.push_back({"C", "2020Q1", Metric::DevelopersByLanguage, std::string("Rust"), 1.0});

  TreatmentRoster roster{{"B"}, "2020Q2"};
  PanelBuild python = build_outcome_panel(records, roster, Metric::DevelopersByLanguage,
                                          std::string("Python"));
  CHECK(python.panel.n_units() == 3);
  CHECK(python.dropped.empty());

  PanelBuild rust = build_outcome_panel(records, roster, Metric::DevelopersByLanguage,
                                        std::string("Rust"));
  CHECK(rust.panel.n_units() == 2);
  REQUIRE(rust.dropped.size() == 1);
  CHECK(rust.dropped[0].economy == "C");
  CHECK(rust.dropped[0].rule.find("Rust") != std::string::npos);
}

TEST_CASE("build_outcome_panel attaches roster treatment") {
  auto records = grid_records({"A", "B", "C"}, {"2020Q1", "2020Q2", "2020Q3"});
  TreatmentRoster roster{{"B", "ZZ"}, "2020Q3"};  // ZZ absent from the data
  PanelBuild out = build_outcome_panel(records, roster, Metric::Pushes);
  CHECK(out.panel.treated_units() == std::vector<std::string>{"B"});
  CHECK(out.panel.treatment_start() == "2020Q3");

  TreatmentRoster empty{{"ZZ"}, "2020Q3"};
  CHECK_THROWS_AS(build_outcome_panel(records, empty, Metric::Pushes), NoTreated);
}

TEST_CASE("population and roster loaders validate their inputs") {
  TempFile pop("pop.csv", "economy,population\nDE,83200000\nFR,67500000\n");
  PopulationTable table = load_population(pop.str());
  CHECK(table.population.at("DE") == 83200000.0);

  TempFile bad("popbad.csv", "economy,population\nDE,-5\n");
  CHECK_THROWS_AS(load_population(bad.str()), InputError);

  TempFile roster("roster.txt",
                  "# initial availability\n"
                  "treatment_start: 2022Q4\n"
                  "DE\n"
                  "FR\n");
  TreatmentRoster r = load_roster(roster.str());
  CHECK(r.treatment_start == "2022Q4");
  CHECK(r.treated_economies == std::vector<std::string>{"DE", "FR"});

  TempFile nostart("roster2.txt", "DE\nFR\n");
  CHECK_THROWS_AS(load_roster(nostart.str()), InputError);
}
