#pragma once

#include <optional>
#include <string>
#include <vector>

#include "madlab/rational.hpp"

namespace madlab {

struct BribeScenario {
  std::string label;
  Rational v;
  Rational f;
  Rational f_a;  // unused by safe_fee / table5
  Rational lambda_min = Rational(1, 100);

  void validate(bool need_f_a = true) const;  // throws std::invalid_argument
};

struct Threshold {
  Rational value;
  bool feasible = false;  // value < v
};

// (f_A - f)/lambda_min + f
Threshold bribe_threshold(const BribeScenario& s);
// lambda_min (v - f) + f
Rational safe_fee(const Rational& v, const Rational& f, const Rational& lambda_min);

struct ResistanceRow {
  std::string label;
  Rational v, f, lambda_min;
  Rational safe_fee;
  Rational ratio;
  std::optional<Rational> published;
  bool match = true;  // within 0.5% of the published ratio, or nothing published
};

struct ResistanceTable {
  std::vector<ResistanceRow> rows;
  std::size_t mismatches() const;
  std::string to_csv() const;
  std::string to_text() const;
};

ResistanceTable table5(const std::vector<BribeScenario>& rows, const std::vector<std::optional<Rational>>& published);

// CSV rows: label,v,f,lambda_min,published_ratio (published may be empty).
// Lines starting with '#' are comments.
struct Table5Input {
  std::vector<BribeScenario> rows;
  std::vector<std::optional<Rational>> published;
};
Table5Input load_table5(const std::string& path);
Table5Input parse_table5(const std::string& text);

// Myopic-mix extension: success (1-p)^(T-1), and the bribe at which a
// risk-neutral non-myopic miner breaks even against including txA.
struct CurvePoint {
  std::int64_t T = 1;
  Rational success;
  std::optional<Rational> required_bribe;  // none when success is 0
};
std::vector<CurvePoint> myopic_cost_curve(const BribeScenario& s, const Rational& p_myopic, std::int64_t t_min,
                                          std::int64_t t_max);

}  // namespace madlab
