#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "panelsynth/errors.hpp"

namespace panelsynth {

// Sort key for period labels. Calendar labels ("2020Q1", "2022-11-30",
// "2022-11", "2022") order chronologically; anything else falls back to a
// natural prefix+number order ("p2" before "p10"), then plain text. Mixed
// formats therefore still sort sensibly within one panel.
struct PeriodKey {
  int tier = 2;           // 0 calendar, 1 natural, 2 lexicographic
  long long y = 0;        // calendar: year / natural: numeric suffix
  int m = 0;              // calendar: month
  int d = 0;              // calendar: day
  bool is_quarter = false;
  int quarter = 0;
  std::string prefix;     // natural: text before the numeric suffix
  std::string raw;

  friend bool operator<(const PeriodKey& a, const PeriodKey& b);
};

PeriodKey parse_period(const std::string& label);

// Label of the quarter following a "YYYYQn" label.
std::string next_quarter(const std::string& quarter_label);

struct PanelRecord {
  std::string unit;
  std::string period;
  double value = 0.0;
};

// Balanced N x T outcome panel. Units keep their input order; periods are
// sorted chronologically. Treatment metadata is attached after construction
// and the object is immutable from then on.
class Panel {
 public:
  static Panel build(const std::vector<PanelRecord>& records);

  // Block adoption: every treated unit starts at `start`.
  void set_treatment(const std::vector<std::string>& treated, const std::string& start);
  // Per-unit adoption dates. Anything non-uniform only survives as far as
  // validate_block, which reports it; to_block refuses it.
  void set_treatment(const std::vector<std::pair<std::string, std::string>>& starts);

  const Eigen::MatrixXd& outcomes() const { return outcomes_; }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<std::string>& period_ids() const { return period_ids_; }
  const std::vector<std::string>& treated_units() const { return treated_units_; }
  const std::map<std::string, std::string>& treatment_starts() const { return start_by_unit_; }

  bool has_treatment() const { return !treated_units_.empty(); }
  // Common adoption period; throws NonBlockAdoption when starts differ.
  const std::string& treatment_start() const;

  int n_units() const { return static_cast<int>(unit_ids_.size()); }
  int n_periods() const { return static_cast<int>(period_ids_.size()); }

  int unit_index(const std::string& unit) const;      // -1 when absent
  int period_index(const std::string& period) const;  // -1 when absent
  bool is_treated(const std::string& unit) const;
  double value(const std::string& unit, const std::string& period) const;

 private:
  Panel() = default;
  Eigen::MatrixXd outcomes_;
  std::vector<std::string> unit_ids_;
  std::vector<std::string> period_ids_;
  std::vector<std::string> treated_units_;           // input order
  std::map<std::string, std::string> start_by_unit_;
};

// (N0, N1, T0, T1) block structure. row_order maps block row r to the panel
// row occupying it: controls fill rows 0..n0-1, treated rows n0..N-1, both in
// their original relative order.
struct BlockDesign {
  int n0 = 0;
  int n1 = 0;
  int t0 = 0;
  int t1 = 0;
  std::vector<int> row_order;
};

BlockDesign to_block(const Panel& panel);

// Outcome matrix with rows permuted to block order.
Eigen::MatrixXd block_matrix(const Panel& panel, const BlockDesign& design);

// Control-unit labels in block-row order (rows 0..n0-1 of the block matrix).
std::vector<std::string> control_labels(const Panel& panel, const BlockDesign& design);

struct BlockValidation {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Checks every block invariant and reports all violations instead of
// stopping at the first.
BlockValidation validate_block(const Panel& panel, const BlockDesign& design);

}  // namespace panelsynth
