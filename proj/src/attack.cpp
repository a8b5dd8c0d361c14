#include "madlab/attack.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace madlab {

void BribeScenario::validate(bool need_f_a) const {
  if (!(lambda_min > 0 && lambda_min <= 1)) throw std::invalid_argument(label + ": lambda_min must be in (0, 1]");
  if (f <= 0) throw std::invalid_argument(label + ": base fee f must be positive");
  if (v < f) throw std::invalid_argument(label + ": v must be at least f");
  if (need_f_a && !(f < f_a && f_a < v))
    throw std::invalid_argument(label + ": f_A must be above f and below v");
}

Threshold bribe_threshold(const BribeScenario& s) {
  s.validate();
  Threshold t;
  t.value = (s.f_a - s.f) / s.lambda_min + s.f;
  t.feasible = t.value < s.v;
  return t;
}

Rational safe_fee(const Rational& v, const Rational& f, const Rational& lambda_min) {
  return lambda_min * (v - f) + f;
}

std::size_t ResistanceTable::mismatches() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.match; }));
}

ResistanceTable table5(const std::vector<BribeScenario>& rows, const std::vector<std::optional<Rational>>& published) {
  ResistanceTable t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const BribeScenario& s = rows[i];
    s.validate(false);
    ResistanceRow r;
    r.label = s.label;
    r.v = s.v;
    r.f = s.f;
    r.lambda_min = s.lambda_min;
    r.safe_fee = safe_fee(s.v, s.f, s.lambda_min);
    r.ratio = r.safe_fee / s.f;
    if (i < published.size()) r.published = published[i];
    if (r.published) {
      Rational rel = (r.ratio - *r.published) / *r.published;
      if (rel < 0) rel = -rel;
      r.match = rel <= Rational(5, 1000);
    }
    t.rows.push_back(r);
  }
  return t;
}

namespace {

std::string num(const Rational& r) {
  std::ostringstream os;
  os << std::setprecision(8) << to_double(r);
  return os.str();
}

}  // namespace

std::string ResistanceTable::to_csv() const {
  std::ostringstream os;
  os << "label,v,f,lambda_min,safe_fee,ratio,published_ratio,match\n";
  for (const auto& r : rows) {
    os << '"' << r.label << "\"," << num(r.v) << "," << num(r.f) << "," << num(r.lambda_min) << "," << num(r.safe_fee)
       << "," << to_decimal(r.ratio, 2) << "," << (r.published ? to_decimal(*r.published, 2) : "") << ","
       << (r.match ? "match" : "MISMATCH") << "\n";
  }
  return os.str();
}

std::string ResistanceTable::to_text() const {
  std::vector<std::vector<std::string>> cells = {{"Name", "v_dep", "f", "(l_min(v-f)+f)/f", "published", "status"}};
  for (const auto& r : rows)
    cells.push_back({r.label, num(r.v), num(r.f), to_decimal(r.ratio, 2),
                     r.published ? to_decimal(*r.published, 2) : "-", r.match ? "match" : "MISMATCH"});
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      os << std::left << std::setw(static_cast<int>(width[c])) << cells[i][c];
      os << (c + 1 < cells[i].size() ? " | " : "\n");
    }
    if (i == 0) {
      for (std::size_t c = 0; c < width.size(); ++c) os << std::string(width[c], '-') << (c + 1 < width.size() ? "-+-" : "\n");
    }
  }
  return os.str();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.pop_back();
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  }
  return out;
}

}  // namespace

Table5Input parse_table5(const std::string& text) {
  Table5Input in;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool header = true;
  while (std::getline(is, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto cols = split_csv(line);
    if (header) {
      header = false;
      if (cols.size() != 5 || cols[0] != "label")
        throw std::invalid_argument("line " + std::to_string(lineno) + ": expected header label,v,f,lambda_min,published_ratio");
      continue;
    }
    if (cols.size() != 5) throw std::invalid_argument("line " + std::to_string(lineno) + ": expected 5 columns");
    try {
      BribeScenario s;
      s.label = cols[0];
      s.v = parse_rational(cols[1]);
      s.f = parse_rational(cols[2]);
      s.lambda_min = parse_rational(cols[3]);
      in.rows.push_back(s);
      in.published.push_back(cols[4].empty() ? std::nullopt : std::optional<Rational>(parse_rational(cols[4])));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return in;
}

Table5Input load_table5(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_table5(ss.str());
}

std::vector<CurvePoint> myopic_cost_curve(const BribeScenario& s, const Rational& p_myopic, std::int64_t t_min,
                                          std::int64_t t_max) {
  s.validate();
  if (p_myopic < 0 || p_myopic > 1) throw std::invalid_argument("p_myopic must be in [0, 1]");
  if (t_min < 1 || t_max < t_min) throw std::invalid_argument("timeout range must satisfy 1 <= T_min <= T_max");
  const Rational q = 1 - p_myopic;
  std::vector<CurvePoint> out;
  for (std::int64_t T = t_min; T <= t_max; ++T) {
    CurvePoint c;
    c.T = T;
    c.success = 1;
    for (std::int64_t i = 1; i < T; ++i) c.success *= q;
    if (T == 1) {
      c.required_bribe = s.f_a;  // both valid in the only round; the higher fee wins
    } else {
      // Miner with lambda_min at round 1 compares f_A now with the bribe,
      // which survives the remaining T-2 intermediate rounds w.p. q^(T-2).
      Rational surv = 1;
      for (std::int64_t i = 2; i < T; ++i) surv *= q;
      if (surv > 0) c.required_bribe = (s.f_a - s.f) / (s.lambda_min * surv) + s.f;
    }
    if (c.success == 0) c.required_bribe.reset();
    out.push_back(c);
  }
  return out;
}

}  // namespace madlab
