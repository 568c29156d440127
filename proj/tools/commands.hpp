#pragma once

// Subcommands of the dagho experiment driver. Each returns a process exit code:
// 0 success, 2 numeric failure, 3 usage or configuration error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "dagho/dagho.hpp"

namespace dagho::cli {

enum ExitCode : int { ok = 0, numeric_failure = 2, usage_error = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InitSpec {
  bool random = true;
  Point point;
};

struct ScheduleFlags {
  std::string kind = "theory";
  std::optional<double> mu0;
  double beta = 0.15;
  double delta = 0.05;
  std::optional<double> decay_factor;
  std::optional<double> ahat_eps;
};

struct StopFlags {
  double mu_floor = 1e-12;
  std::size_t max_stages = 200;
  std::optional<double> dist_tol;

  [[nodiscard]] StopRule rule() const { return {mu_floor, max_stages, dist_tol}; }
};

struct HomotopyConfig {
  double a = 1.0;
  ScheduleFlags schedule;
  std::string init = "random";
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  std::optional<std::string> box;
  StopFlags stop;
  std::size_t path_stride = 10;
  std::optional<std::string> out;
  std::optional<std::string> report;
  std::string format = "csv";
  bool force = false;
};

struct LandscapeConfig {
  double a = 0.5;
  double mu = 0.005;
  std::optional<std::string> grid;
  std::optional<std::string> out;
};

struct StationaryConfig {
  double a = 1.0;
  std::optional<double> mu;
  std::optional<std::string> out;
};

struct CompareConfig {
  double a = 0.5;
  std::optional<double> mu0;
  std::string init = "random";
  std::uint64_t seed = 0;
  std::optional<std::string> box;
  double decay_factor = 500.0;
  StopFlags stop;
  std::size_t path_stride = 10;
  std::string out = "compare";
};

struct SampleConfig {
  double a = 1.0;
  std::size_t n = 1000;
  std::string noise = "gaussian";
  std::uint64_t seed = 0;
  std::optional<std::string> out;
};

struct FitConfig {
  std::string in;
  ScheduleFlags schedule{"ahat", 1.0 / 27.0, 0.15, 0.05, std::nullopt, std::nullopt};
  std::optional<double> a;
  std::string init = "0,0";
  std::uint64_t seed = 0;
  StopFlags stop;
  std::optional<std::string> out;
  bool force = false;
};

// ---------------------------------------------------------------------------
// helpers

inline std::pair<double, double> parse_pair(const std::string& text, char sep,
                                            const std::string& what) {
  std::istringstream is(text);
  double u = 0.0, v = 0.0;
  char c = 0;
  std::string rest;
  if (!(is >> u >> c >> v) || c != sep || (is >> rest)) {
    throw UsageError(what + ": expected two numbers separated by '" + std::string(1, sep) +
                     "', got '" + text + "'");
  }
  return {u, v};
}

inline InitSpec parse_init(const std::string& text) {
  if (text == "random") return {};
  const auto [x, y] = parse_pair(text, ',', "--init");
  return {false, {x, y}};
}

/// Default random-init box [-2a, 2a].
inline std::pair<double, double> parse_box(const std::optional<std::string>& text, double a) {
  if (!text) return {-2.0 * a, 2.0 * a};
  const auto [lo, hi] = parse_pair(*text, ':', "--box");
  if (!(lo < hi)) throw UsageError("--box: expected lo < hi");
  return {lo, hi};
}

inline Point draw_init(std::uint64_t seed, std::pair<double, double> box) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(box.first, box.second);
  const double x = u(rng);
  const double y = u(rng);
  return {x, y};
}

inline Schedule build_schedule(const ScheduleFlags& f, double a) {
  const ModelParams m(a);
  const auto kind = parse_schedule_kind(f.kind);
  const auto [lo, hi] = theory_mu0_interval(m);
  const double mid = 0.5 * (lo + hi);
  switch (kind) {
    case ScheduleKind::theory: return Schedule::theory(a, f.mu0.value_or(mid));
    case ScheduleKind::practical: return Schedule::practical(f.mu0.value_or(1.0 / 27.0));
    case ScheduleKind::ahat: return Schedule::ahat(f.mu0.value_or(mid), f.ahat_eps.value_or(-1.0));
    case ScheduleKind::gd: {
      auto s = Schedule::gd(a, f.beta, f.delta, 0.0);
      const auto adm = validate_mu0(s, m);
      s.mu0 = f.mu0.value_or(0.5 * (adm.lower + adm.upper));
      return s;
    }
    case ScheduleKind::custom:
      if (!f.decay_factor) throw UsageError("--schedule custom needs --decay-factor");
      if (!(*f.decay_factor > 1.0)) throw UsageError("--decay-factor must exceed 1");
      return Schedule::custom_factor(f.mu0.value_or(mid), *f.decay_factor);
  }
  throw UsageError("unknown schedule");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write '" + path + "'");
  return os;
}

inline void emit(const std::optional<std::string>& path, const std::string& text) {
  if (!path) {
    std::cout << text;
    return;
  }
  auto os = open_out(*path);
  os << text;
  if (!os) throw UsageError("write to '" + *path + "' failed");
}

/// out with its extension replaced, or with a suffix inserted before it.
inline std::string sibling(const std::string& out, const std::string& suffix,
                           const std::string& ext) {
  std::filesystem::path p(out);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + suffix + ext)).string();
}

inline std::string dump(const io::json& j) { return j.dump(2) + "\n"; }

struct Run {
  Point init;
  std::uint64_t seed = 0;
  HomotopyReport report;
};

inline HomotopyReport run_one(const Schedule& sched, Point w0, const SecondMoment& loss,
                              const ModelParams& m, const StopRule& stop, std::size_t stride,
                              bool force) {
  if (sched.kind == ScheduleKind::gd) {
    return run_homotopy_gd(m.a(), sched.beta, sched.delta, sched.mu0, w0, stop, force, stride);
  }
  FlowOptions flow;
  flow.record_path = stride > 0;
  flow.path_stride = std::max<std::size_t>(stride, 1);
  return run_homotopy_flow(sched, w0, loss, m, stop, flow, force);
}

inline int exit_for(const HomotopyReport& r) {
  return r.stop_reason == StopReason::failure ? numeric_failure : ok;
}

// ---------------------------------------------------------------------------
// commands

inline int cmd_homotopy(const HomotopyConfig& cfg) {
  const ModelParams m(cfg.a);
  const auto sched = build_schedule(cfg.schedule, cfg.a);
  const auto adm = validate_mu0(sched, m);
  if (!adm.ok && !cfg.force) {
    throw UsageError("inadmissible schedule (" + adm.violation + "); pass --force to run anyway");
  }
  if (cfg.format != "csv" && cfg.format != "json") throw UsageError("--format must be csv or json");
  const auto init = parse_init(cfg.init);
  const auto box = parse_box(cfg.box, cfg.a);
  if (cfg.seeds < 1) throw UsageError("--seeds must be >= 1");
  if (cfg.seeds > 1 && !init.random) throw UsageError("--seeds needs --init random");
  const auto loss = SecondMoment::population(m);
  const auto stop = cfg.stop.rule();
  const std::size_t stride = cfg.format == "csv" ? cfg.path_stride : 0;

  std::vector<std::future<Run>> jobs;
  for (std::size_t i = 0; i < cfg.seeds; ++i) {
    const std::uint64_t seed = cfg.seed + i;
    const Point w0 = init.random ? draw_init(seed, box) : init.point;
    jobs.push_back(std::async(std::launch::async, [=, &m, &loss] {
      spdlog::debug("seed {} init ({}, {})", seed, w0.x, w0.y);
      return Run{w0, seed, run_one(sched, w0, loss, m, stop, stride, cfg.force)};
    }));
  }
  std::vector<Run> runs;
  for (auto& j : jobs) runs.push_back(j.get());

  int code = ok;
  io::json summary = io::json::array();
  for (const auto& run : runs) {
    const auto& rep = run.report;
    spdlog::info("seed {}: {} stages, final ({}, {}), dist {}, stop {}", run.seed,
                 rep.stages.size(), rep.final.x, rep.final.y, rep.dist_to_global,
                 to_string(rep.stop_reason));
    if (rep.stop_reason == StopReason::failure) code = numeric_failure;
    io::json j = io::to_json(rep);
    j["a"] = cfg.a;
    j["init"] = io::to_json(run.init);
    if (init.random) j["seed"] = run.seed;
    summary.push_back(j);

    if (!cfg.out) continue;
    const std::string suffix = cfg.seeds > 1 ? "_seed" + std::to_string(run.seed) : "";
    if (cfg.format == "csv") {
      const std::string path = cfg.seeds > 1 ? sibling(*cfg.out, suffix, ".csv") : *cfg.out;
      auto os = open_out(path);
      io::write_trajectory_csv(os, rep, loss);
    }
  }

  const io::json doc = cfg.seeds == 1 ? summary.at(0) : io::json{{"runs", summary}};
  std::optional<std::string> report_path = cfg.report;
  if (!report_path && cfg.out) {
    report_path = cfg.format == "json" ? *cfg.out : sibling(*cfg.out, "", ".json");
  }
  emit(report_path, dump(doc));
  return code;
}

inline int cmd_landscape(const LandscapeConfig& cfg) {
  const ModelParams m(cfg.a);
  if (!(cfg.mu >= 0.0)) throw UsageError("--mu must be nonnegative");
  const auto grid = cfg.grid ? io::parse_grid(*cfg.grid)
                             : io::GridSpec{-2.0 * cfg.a, 2.0 * cfg.a, 101,
                                            -2.0 * cfg.a, 2.0 * cfg.a, 101};
  std::ostringstream os;
  io::write_landscape_csv(os, grid, PenalizedObjective{SecondMoment::population(m), cfg.mu});
  emit(cfg.out, os.str());
  return ok;
}

inline int cmd_stationary(const StationaryConfig& cfg) {
  const ModelParams m(cfg.a);
  const auto th = critical_tau(m);
  io::json doc;
  if (cfg.mu) {
    if (!(*cfg.mu > 0.0)) throw UsageError("--mu must be positive");
    doc = io::to_json(solve_stationary_points(*cfg.mu, m), th.tau);
  } else {
    doc = {{"a", cfg.a}, {"tau", th.tau}, {"p_tau", tau_indicator(th.tau, m)}};
    io::json counts = io::json::array();
    for (const double f : {0.5, 1.0, 1.5}) {
      counts.push_back({{"mu_over_tau", f},
                        {"mu", f * th.tau},
                        {"roots", solve_stationary_points(f * th.tau, m).size()}});
    }
    doc["root_counts"] = counts;
  }
  emit(cfg.out, dump(doc));
  return ok;
}

inline int cmd_compare_schedules(const CompareConfig& cfg) {
  const ModelParams m(cfg.a);
  const auto [lo, hi] = theory_mu0_interval(m);
  const double mu0 = cfg.mu0.value_or(0.5 * (lo + hi));
  if (!(mu0 > 0.0)) throw UsageError("--mu0 must be positive");
  if (!(cfg.decay_factor > 1.0)) throw UsageError("--decay-factor must exceed 1");
  const auto init = parse_init(cfg.init);
  const Point w0 = init.random ? draw_init(cfg.seed, parse_box(cfg.box, cfg.a)) : init.point;
  const auto loss = SecondMoment::population(m);
  const auto stop = cfg.stop.rule();

  const auto good_sched = Schedule::theory(cfg.a, mu0);
  const auto bad_sched = Schedule::custom_factor(mu0, cfg.decay_factor);
  // Both are explicit experiments; admissibility is recorded rather than enforced.
  auto good = std::async(std::launch::async, [&] {
    return run_one(good_sched, w0, loss, m, stop, cfg.path_stride, true);
  });
  auto bad = std::async(std::launch::async, [&] {
    return run_one(bad_sched, w0, loss, m, stop, cfg.path_stride, true);
  });
  const auto rg = good.get();
  const auto rb = bad.get();

  const Point spurious{0.0, m.spurious_y()};
  auto write = [&](const std::string& path, const HomotopyReport& rep, const std::string& label) {
    auto os = open_out(path);
    os << "# schedule=" << label << " a=" << io::num(cfg.a) << " mu0=" << io::num(mu0)
       << " init=" << io::num(w0.x) << ',' << io::num(w0.y) << '\n';
    io::write_trajectory_csv(os, rep, loss);
  };
  const std::string good_path = cfg.out + "_good.csv";
  const std::string bad_path = cfg.out + "_bad.csv";
  write(good_path, rg, "theory");
  write(bad_path, rb, "custom/" + io::num(cfg.decay_factor));

  auto side = [&](const HomotopyReport& rep, const std::string& path) {
    return io::json{{"trajectory", std::filesystem::path(path).filename().string()},
                    {"schedule", io::to_json(rep.schedule)},
                    {"admissible", rep.admissible},
                    {"final", io::to_json(rep.final)},
                    {"dist_to_global", distance_to_global(rep.final, m)},
                    {"dist_to_spurious", distance_to(rep.final, spurious)},
                    {"stages", rep.stages.size()},
                    {"stop_reason", std::string(to_string(rep.stop_reason))}};
  };
  const io::json doc{{"a", cfg.a},
                     {"mu0", mu0},
                     {"init", io::to_json(w0)},
                     {"global", io::to_json(global_optimum(m))},
                     {"spurious", io::to_json(spurious)},
                     {"good", side(rg, good_path)},
                     {"bad", side(rb, bad_path)}};
  emit(cfg.out + "_summary.json", dump(doc));
  return std::max(exit_for(rg), exit_for(rb));
}

inline int cmd_data_sample(const SampleConfig& cfg) {
  const ModelParams m(cfg.a);
  if (cfg.n < 2) throw UsageError("--n must be >= 2");
  const auto ds = sample_sem(m, cfg.n, parse_noise_kind(cfg.noise), cfg.seed);
  std::ostringstream os;
  io::write_dataset_csv(os, ds);
  emit(cfg.out, os.str());
  return ok;
}

inline int cmd_data_fit(const FitConfig& cfg) {
  std::ifstream is(cfg.in, std::ios::binary);
  if (!is) throw UsageError("cannot read '" + cfg.in + "'");
  const auto ds = io::read_dataset_csv(is);
  if (ds.rows.size() < 2) throw UsageError("dataset needs at least 2 rows");
  const auto loss = moments_of(ds);
  const auto oracle = enumeration_oracle(loss);

  // Admissibility is judged against the least-squares slope; the ahat rate itself
  // never uses it.
  const double slope = loss.s11 > 0.0 ? loss.s12 / loss.s11 : 0.0;
  const double a_model = cfg.a.value_or(std::abs(slope));
  if (!(a_model > 0.0)) throw UsageError("data carry no x1-x2 association to fit");
  const ModelParams m(a_model);
  const auto sched = build_schedule(cfg.schedule, a_model);
  if (sched.kind == ScheduleKind::gd) throw UsageError("data fit supports flow schedules only");
  const auto adm = validate_mu0(sched, m);
  if (!adm.ok && !cfg.force) {
    throw UsageError("inadmissible schedule (" + adm.violation + "); pass --force to run anyway");
  }
  const auto init = parse_init(cfg.init);
  const Point w0 = init.random ? draw_init(cfg.seed, parse_box(std::nullopt, a_model)) : init.point;
  const auto rep = run_homotopy_flow(sched, w0, loss, m, cfg.stop.rule(), {}, cfg.force);

  const Point& w = rep.final;
  const Edge structure = std::abs(w.x) >= std::abs(w.y) ? Edge::x1_to_x2 : Edge::x2_to_x1;
  const io::json doc{
      {"samples", ds.rows.size()},
      {"moments", {{"s11", loss.s11}, {"s12", loss.s12}, {"s22", loss.s22}}},
      {"schedule", io::to_json(rep.schedule)},
      {"admissible", rep.admissible},
      {"init", io::to_json(w0)},
      {"final", io::to_json(w)},
      {"h_final", acyclicity_penalty(w)},
      {"structure", std::string(to_string(structure))},
      {"coefficient", structure == Edge::x1_to_x2 ? w.x : w.y},
      {"oracle",
       {{"structure", std::string(to_string(oracle.structure))},
        {"winner", io::to_json(oracle.winner)},
        {"score", oracle.score},
        {"loser_score", oracle.loser_score}}},
      {"dist_to_oracle", rep.dist_to_global},
      {"stages", rep.stages.size()},
      {"stop_reason", std::string(to_string(rep.stop_reason))}};
  emit(cfg.out, dump(doc));
  return exit_for(rep);
}

}  // namespace dagho::cli
