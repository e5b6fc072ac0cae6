#include "panelsynth/panel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace panelsynth {

namespace {

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

bool parse_int(const std::string& s, long long& out) {
  if (!all_digits(s)) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

bool operator<(const PeriodKey& a, const PeriodKey& b) {
  if (a.tier != b.tier) return a.tier < b.tier;
  switch (a.tier) {
    case 0:
      if (a.y != b.y) return a.y < b.y;
      if (a.m != b.m) return a.m < b.m;
      if (a.d != b.d) return a.d < b.d;
      break;
    case 1:
      if (a.prefix != b.prefix) return a.prefix < b.prefix;
      if (a.y != b.y) return a.y < b.y;
      break;
    default:
      break;
  }
  return a.raw < b.raw;  // deterministic tiebreak
}

PeriodKey parse_period(const std::string& label) {
  PeriodKey key;
  key.raw = label;

  // "YYYYQn" quarters (case-insensitive Q).
  if (label.size() >= 6 && (label[4] == 'Q' || label[4] == 'q')) {
    long long year = 0, q = 0;
    if (parse_int(label.substr(0, 4), year) && parse_int(label.substr(5), q) && q >= 1 && q <= 4) {
      key.tier = 0;
      key.y = year;
      key.m = static_cast<int>(3 * (q - 1) + 1);
      key.d = 1;
      key.is_quarter = true;
      key.quarter = static_cast<int>(q);
      return key;
    }
  }

  // ISO dates: "YYYY-MM-DD", "YYYY-MM", bare "YYYY".
  {
    std::vector<std::string> parts;
    std::stringstream ss(label);
    std::string piece;
    while (std::getline(ss, piece, '-')) parts.push_back(piece);
    if (!parts.empty() && parts.size() <= 3 && parts[0].size() == 4) {
      long long y = 0, m = 1, d = 1;
      bool ok = parse_int(parts[0], y);
      if (ok && parts.size() >= 2) ok = parse_int(parts[1], m) && m >= 1 && m <= 12;
      if (ok && parts.size() == 3) ok = parse_int(parts[2], d) && d >= 1 && d <= 31;
      if (ok) {
        key.tier = 0;
        key.y = y;
        key.m = static_cast<int>(m);
        key.d = static_cast<int>(d);
        return key;
      }
    }
  }

  // Natural order: text prefix + numeric suffix ("p1", "period12").
  {
    size_t pos = label.size();
    while (pos > 0 && std::isdigit(static_cast<unsigned char>(label[pos - 1]))) --pos;
    if (pos < label.size()) {
      long long n = 0;
      if (parse_int(label.substr(pos), n)) {
        key.tier = 1;
        key.prefix = label.substr(0, pos);
        key.y = n;
        return key;
      }
    }
  }

  key.tier = 2;
  return key;
}

std::string next_quarter(const std::string& quarter_label) {
  PeriodKey k = parse_period(quarter_label);
  if (!k.is_quarter) throw Error("next_quarter: not a quarter label: " + quarter_label);
  long long y = k.y;
  int q = k.quarter + 1;
  if (q > 4) {
    q = 1;
    ++y;
  }
  return std::to_string(y) + "Q" + std::to_string(q);
}

Panel Panel::build(const std::vector<PanelRecord>& records) {
  if (records.empty()) throw EmptyInput("build_panel: no records");

  Panel p;
  std::unordered_map<std::string, int> unit_idx;
  std::unordered_set<std::string> period_seen;
  for (const auto& r : records) {
    if (unit_idx.emplace(r.unit, static_cast<int>(p.unit_ids_.size())).second)
      p.unit_ids_.push_back(r.unit);
    if (period_seen.insert(r.period).second) p.period_ids_.push_back(r.period);
  }
  std::stable_sort(p.period_ids_.begin(), p.period_ids_.end(),
                   [](const std::string& a, const std::string& b) {
                     return parse_period(a) < parse_period(b);
                   });
  std::unordered_map<std::string, int> period_idx;
  for (int t = 0; t < static_cast<int>(p.period_ids_.size()); ++t)
    period_idx[p.period_ids_[t]] = t;

  const int n = static_cast<int>(p.unit_ids_.size());
  const int T = static_cast<int>(p.period_ids_.size());
  p.outcomes_.setZero(n, T);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen(n, T);
  seen.setConstant(false);

  for (const auto& r : records) {
    const int i = unit_idx.at(r.unit);
    const int t = period_idx.at(r.period);
    if (seen(i, t))
      throw DuplicateCell("build_panel: duplicate cell (" + r.unit + ", " + r.period + ")");
    seen(i, t) = true;
    p.outcomes_(i, t) = r.value;
  }

  std::vector<std::pair<std::string, std::string>> missing;
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t)
      if (!seen(i, t)) missing.emplace_back(p.unit_ids_[i], p.period_ids_[t]);
  if (!missing.empty()) {
    std::string msg = "build_panel: unbalanced panel, missing";
    const size_t shown = std::min<size_t>(missing.size(), 12);
    for (size_t k = 0; k < shown; ++k)
      msg += " (" + missing[k].first + ", " + missing[k].second + ")";
    if (missing.size() > shown)
      msg += " and " + std::to_string(missing.size() - shown) + " more";
    throw UnbalancedPanel(msg, std::move(missing));
  }

  if (n < 2 || T < 2)
    throw EmptyInput("build_panel: need at least 2 units and 2 periods, got " +
                     std::to_string(n) + "x" + std::to_string(T));
  return p;
}

void Panel::set_treatment(const std::vector<std::string>& treated, const std::string& start) {
  std::vector<std::pair<std::string, std::string>> starts;
  starts.reserve(treated.size());
  for (const auto& u : treated) starts.emplace_back(u, start);
  set_treatment(starts);
}

void Panel::set_treatment(const std::vector<std::pair<std::string, std::string>>& starts) {
  if (starts.empty()) throw NoTreated("set_treatment: no treated units");

  std::vector<std::string> treated;
  std::map<std::string, std::string> by_unit;
  for (const auto& [unit, start] : starts) {
    if (unit_index(unit) < 0)
      throw InputError("set_treatment: unknown unit " + unit);
    if (!by_unit.emplace(unit, start).second)
      throw InputError("set_treatment: unit listed twice: " + unit);
    treated.push_back(unit);

    const int ti = period_index(start);
    if (ti < 0) throw InputError("set_treatment: unknown period " + start);
    if (ti == 0)
      throw NoPrePeriods("set_treatment: treatment_start " + start +
                         " is the first period, no pre-treatment data");
  }
  if (treated.size() >= unit_ids_.size())
    throw NoControls("set_treatment: every unit treated, no controls remain");

  treated_units_ = std::move(treated);
  start_by_unit_ = std::move(by_unit);
}

const std::string& Panel::treatment_start() const {
  if (start_by_unit_.empty()) throw Error("treatment metadata not set");
  const std::string& first = start_by_unit_.begin()->second;
  for (const auto& [unit, start] : start_by_unit_)
    if (start != first)
      throw NonBlockAdoption("treatment starts differ across treated units (" +
                             start_by_unit_.begin()->first + "=" + first + " vs " + unit +
                             "=" + start + ")");
  return first;
}

int Panel::unit_index(const std::string& unit) const {
  auto it = std::find(unit_ids_.begin(), unit_ids_.end(), unit);
  return it == unit_ids_.end() ? -1 : static_cast<int>(it - unit_ids_.begin());
}

int Panel::period_index(const std::string& period) const {
  auto it = std::find(period_ids_.begin(), period_ids_.end(), period);
  return it == period_ids_.end() ? -1 : static_cast<int>(it - period_ids_.begin());
}

bool Panel::is_treated(const std::string& unit) const {
  return start_by_unit_.count(unit) > 0;
}

double Panel::value(const std::string& unit, const std::string& period) const {
  const int i = unit_index(unit);
  const int t = period_index(period);
  if (i < 0 || t < 0) throw Error("value: unknown cell (" + unit + ", " + period + ")");
  return outcomes_(i, t);
}

BlockDesign to_block(const Panel& panel) {
  if (!panel.has_treatment()) throw Error("to_block: treatment metadata not set");

  const std::string& start = panel.treatment_start();  // throws on staggering
  const int t_start = panel.period_index(start);
  BlockDesign d;
  d.t0 = t_start;
  d.t1 = panel.n_periods() - t_start;
  if (d.t0 < 1) throw NoPrePeriods("to_block: no pre-treatment periods");
  if (d.t1 < 1) throw NoPostPeriods("to_block: no post-treatment periods");

  std::vector<int> controls, treated;
  for (int i = 0; i < panel.n_units(); ++i) {
    if (panel.is_treated(panel.unit_ids()[i]))
      treated.push_back(i);
    else
      controls.push_back(i);
  }
  if (controls.empty()) throw NoControls("to_block: no control units");
  if (treated.empty()) throw NoTreated("to_block: no treated units");

  d.n0 = static_cast<int>(controls.size());
  d.n1 = static_cast<int>(treated.size());
  d.row_order = std::move(controls);
  d.row_order.insert(d.row_order.end(), treated.begin(), treated.end());
  return d;
}

Eigen::MatrixXd block_matrix(const Panel& panel, const BlockDesign& design) {
  if (static_cast<int>(design.row_order.size()) != panel.n_units())
    throw DimensionMismatch("block_matrix: row_order size does not match panel");
  Eigen::MatrixXd Y(panel.n_units(), panel.n_periods());
  for (int r = 0; r < panel.n_units(); ++r)
    Y.row(r) = panel.outcomes().row(design.row_order[r]);
  return Y;
}

std::vector<std::string> control_labels(const Panel& panel, const BlockDesign& design) {
  std::vector<std::string> labels;
  labels.reserve(design.n0);
  for (int r = 0; r < design.n0; ++r)
    labels.push_back(panel.unit_ids()[design.row_order[r]]);
  return labels;
}

BlockValidation validate_block(const Panel& panel, const BlockDesign& design) {
  BlockValidation v;
  auto fail = [&v](const std::string& msg) { v.violations.push_back(msg); };

  if (design.n0 < 1) fail("n0 < 1: no control units");
  if (design.n1 < 1) fail("n1 < 1: no treated units");
  if (design.t0 < 1) fail("t0 < 1: no pre-treatment periods");
  if (design.t1 < 1) fail("t1 < 1: no post-treatment periods");
  if (design.n0 + design.n1 != panel.n_units())
    fail("count mismatch: n0 + n1 = " + std::to_string(design.n0 + design.n1) +
         " but panel has " + std::to_string(panel.n_units()) + " units");
  if (design.t0 + design.t1 != panel.n_periods())
    fail("count mismatch: t0 + t1 = " + std::to_string(design.t0 + design.t1) +
         " but panel has " + std::to_string(panel.n_periods()) + " periods");

  // row_order must be a permutation of panel rows.
  std::vector<bool> hit(panel.n_units(), false);
  bool perm_ok = static_cast<int>(design.row_order.size()) == panel.n_units();
  if (perm_ok) {
    for (int r : design.row_order) {
      if (r < 0 || r >= panel.n_units() || hit[r]) {
        perm_ok = false;
        break;
      }
      hit[r] = true;
    }
  }
  if (!perm_ok) {
    fail("row_order is not a permutation of panel rows");
    return v;  // membership checks below would not be meaningful
  }

  // Controls first, treated second, each in original relative order.
  int prev = -1;
  bool stable = true;
  for (int r = 0; r < design.n0 && r < panel.n_units(); ++r) {
    const int row = design.row_order[r];
    if (panel.is_treated(panel.unit_ids()[row]))
      fail("treated unit " + panel.unit_ids()[row] + " in control block");
    if (row < prev) stable = false;
    prev = row;
  }
  prev = -1;
  for (int r = design.n0; r < panel.n_units(); ++r) {
    const int row = design.row_order[r];
    if (!panel.is_treated(panel.unit_ids()[row]))
      fail("control unit " + panel.unit_ids()[row] + " in treated block");
    if (row < prev) stable = false;
    prev = row;
  }
  if (!stable) fail("row_order does not preserve original relative order within blocks");

  if (panel.has_treatment()) {
    const auto& starts = panel.treatment_starts();
    const std::string& first = starts.begin()->second;
    bool uniform = true;
    for (const auto& [unit, start] : starts)
      if (start != first) uniform = false;
    if (!uniform) {
      fail("non-block adoption: treated units have differing treatment starts");
    } else {
      const int t_start = panel.period_index(first);
      if (t_start >= 0 && t_start != design.t0)
        fail("t0 = " + std::to_string(design.t0) + " does not match treatment start " + first +
             " at period index " + std::to_string(t_start));
    }
    int n_treated = static_cast<int>(panel.treated_units().size());
    if (n_treated != design.n1)
      fail("n1 = " + std::to_string(design.n1) + " but panel marks " +
           std::to_string(n_treated) + " treated units");
  } else {
    fail("panel has no treatment metadata");
  }
  return v;
}

}  // namespace panelsynth
