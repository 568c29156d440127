#pragma once

// JSON and CSV renderings of landscape and homotopy results, and the dataset CSV
// reader/writer. Doubles are written with 17 significant digits.

#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dagho/homotopy.hpp"
#include "dagho/model.hpp"
#include "dagho/stationary.hpp"

namespace dagho::io {

using nlohmann::json;

/// Shortest-safe decimal rendering of a double: 17 significant digits.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const Point& p) { return {{"x", p.x}, {"y", p.y}}; }

inline json to_json(const StationarySet& set, std::optional<double> tau = {}) {
  json j;
  j["mu"] = set.mu;
  j["a"] = set.a;
  j["tau"] = tau ? json(*tau) : json(nullptr);
  j["points"] = json::array();
  for (const auto& sp : set.points) {
    j["points"].push_back({{"x", sp.point.x},
                           {"y", sp.point.y},
                           {"branch", std::string(to_string(sp.branch))},
                           {"kind", std::string(to_string(sp.kind))}});
  }
  return j;
}

inline json to_json(const Schedule& s) {
  json j{{"kind", std::string(to_string(s.kind))}, {"mu0", s.mu0}};
  switch (s.kind) {
    case ScheduleKind::theory: j["a"] = s.a; break;
    case ScheduleKind::practical: j["a_hat"] = s.a_hat(); break;
    case ScheduleKind::ahat:
      j["eps"] = s.eps;
      j["a_hat"] = s.a_hat();
      break;
    case ScheduleKind::gd:
      j["a"] = s.a;
      j["beta"] = s.beta;
      j["delta"] = s.delta;
      break;
    case ScheduleKind::custom:
      if (s.step) {
        j["step"] = "function";
      } else {
        j["decay_factor"] = s.factor;
      }
      break;
  }
  return j;
}

inline json to_json(const StageRecord& st) {
  json j{{"k", st.k},
         {"mu", st.mu},
         {"start", to_json(st.start)},
         {"end", to_json(st.end)},
         {"inner_steps", st.inner_steps},
         {"grad_norm", st.grad_norm},
         {"converged", st.converged},
         {"g_start", st.g_start},
         {"g_end", st.g_end}};
  j["eps"] = st.eps ? json(*st.eps) : json(nullptr);
  j["eta"] = st.eta ? json(*st.eta) : json(nullptr);
  if (st.perturbations > 0) j["perturbations"] = st.perturbations;
  return j;
}

inline json to_json(const HomotopyReport& r) {
  json j{{"schedule", to_json(r.schedule)},
         {"admissible", r.admissible},
         {"reference", to_json(r.reference)},
         {"final", to_json(r.final)},
         {"dist_to_global", r.dist_to_global},
         {"total_inner_steps", r.total_inner_steps},
         {"stop_reason", std::string(to_string(r.stop_reason))},
         {"stage_count", r.stages.size()}};
  if (!r.violation.empty()) j["violation"] = r.violation;
  if (!r.failure.empty()) j["failure"] = r.failure;
  j["stages"] = json::array();
  for (const auto& st : r.stages) j["stages"].push_back(to_json(st));
  return j;
}

// ---------------------------------------------------------------------------
// CSV writers

inline void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  os << "x1,x2\n";
  for (const auto& r : ds.rows) os << num(r.x1) << ',' << num(r.x2) << '\n';
}

inline constexpr const char* path_header = "step,t,x,y,f,h,g,grad_norm";

inline void write_path_csv(std::ostream& os, const SolveResult& res,
                           const PenalizedObjective& g) {
  os << path_header << '\n';
  for (const auto& pp : res.path) {
    const Point& p = pp.point;
    os << pp.step << ',' << num(pp.t) << ',' << num(p.x) << ',' << num(p.y) << ','
       << num(g.f(p)) << ',' << num(g.h(p)) << ',' << num(g.value(p)) << ','
       << num(g.gradient(p).norm()) << '\n';
  }
}

inline constexpr const char* trajectory_header =
    "stage,mu,eps,eta,step,x,y,f,h,g,grad_norm,dist_to_global";

/// Stage paths concatenated; a stage without a recorded path contributes its start
/// and end points.
inline void write_trajectory_csv(std::ostream& os, const HomotopyReport& rep,
                                 const SecondMoment& loss) {
  os << trajectory_header << '\n';
  for (const auto& st : rep.stages) {
    const PenalizedObjective g{loss, st.mu};
    auto row = [&](std::size_t step, const Point& p) {
      os << st.k << ',' << num(st.mu) << ',' << opt_num(st.eps) << ',' << opt_num(st.eta) << ','
         << step << ',' << num(p.x) << ',' << num(p.y) << ',' << num(g.f(p)) << ','
         << num(g.h(p)) << ',' << num(g.value(p)) << ',' << num(g.gradient(p).norm()) << ','
         << num(distance_to(p, rep.reference)) << '\n';
    };
    if (st.path.empty()) {
      row(0, st.start);
      row(st.inner_steps, st.end);
    } else {
      for (const auto& pp : st.path) row(pp.step, pp.point);
    }
  }
}

inline constexpr const char* landscape_header = "x,y,f,h,g,grad_x,grad_y";

struct GridSpec {
  double xmin = 0.0;
  double xmax = 1.0;
  std::size_t nx = 2;
  double ymin = 0.0;
  double ymax = 1.0;
  std::size_t ny = 2;

  void validate() const {
    if (nx < 2 || ny < 2) throw std::invalid_argument("grid: nx and ny must be >= 2");
    if (!(xmin < xmax) || !(ymin < ymax)) {
      throw std::invalid_argument("grid: bounds must satisfy min < max");
    }
  }
};

/// Parses `xmin:xmax:nx,ymin:ymax:ny`.
inline GridSpec parse_grid(const std::string& text) {
  GridSpec g;
  char c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0;
  std::istringstream is(text);
  long long nx = 0, ny = 0;
  is >> g.xmin >> c1 >> g.xmax >> c2 >> nx >> c3 >> g.ymin >> c4 >> g.ymax >> c5 >> ny;
  std::string rest;
  if (!is || c1 != ':' || c2 != ':' || c3 != ',' || c4 != ':' || c5 != ':' || (is >> rest)) {
    throw std::invalid_argument("grid must look like xmin:xmax:nx,ymin:ymax:ny, got '" + text +
                                "'");
  }
  if (nx < 2 || ny < 2) throw std::invalid_argument("grid: nx and ny must be >= 2");
  g.nx = static_cast<std::size_t>(nx);
  g.ny = static_cast<std::size_t>(ny);
  g.validate();
  return g;
}

/// Rows ordered x-major: for each x, all y values.
inline void write_landscape_csv(std::ostream& os, const GridSpec& grid,
                                const PenalizedObjective& g) {
  grid.validate();
  os << landscape_header << '\n';
  for (std::size_t i = 0; i < grid.nx; ++i) {
    const double x = grid.xmin + (grid.xmax - grid.xmin) * static_cast<double>(i) /
                                     static_cast<double>(grid.nx - 1);
    for (std::size_t j = 0; j < grid.ny; ++j) {
      const double y = grid.ymin + (grid.ymax - grid.ymin) * static_cast<double>(j) /
                                       static_cast<double>(grid.ny - 1);
      const Point p{x, y};
      const Vec2 gr = g.gradient(p);
      os << num(x) << ',' << num(y) << ',' << num(g.f(p)) << ',' << num(g.h(p)) << ','
         << num(g.value(p)) << ',' << num(gr.x) << ',' << num(gr.y) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Dataset reader

namespace detail {

inline double parse_field(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw CsvError(line, "not a number: '" + s + "'");
  }
  while (used < s.size() && (s[used] == ' ' || s[used] == '\r')) ++used;
  if (used != s.size()) throw CsvError(line, "trailing characters in '" + s + "'");
  if (!std::isfinite(v)) throw CsvError(line, "non-finite value");
  return v;
}

}  // namespace detail

/// Reads a `x1,x2` dataset. Blank lines are skipped; anything else malformed throws
/// CsvError with its 1-based line number.
inline Dataset read_dataset_csv(std::istream& is) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw CsvError(1, "empty input, expected header x1,x2");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x1,x2") throw CsvError(lineno, "expected header x1,x2, got '" + line + "'");
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw CsvError(lineno, "expected 2 fields");
    }
    ds.rows.push_back({detail::parse_field(line.substr(0, comma), lineno),
                       detail::parse_field(line.substr(comma + 1), lineno)});
  }
  return ds;
}

}  // namespace dagho::io
