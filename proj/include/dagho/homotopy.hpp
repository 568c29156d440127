#pragma once

// Path following in the penalty weight: mu-schedules, admissibility checks, the
// warm-started outer loops over gradient flow or gradient descent, and the outer
// iteration bound of the descent variant.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "dagho/dynamics.hpp"
#include "dagho/model.hpp"
#include "dagho/stationary.hpp"

namespace dagho {

enum class ScheduleKind { theory, practical, ahat, gd, custom };

[[nodiscard]] inline std::string_view to_string(ScheduleKind k) noexcept {
  switch (k) {
    case ScheduleKind::theory: return "theory";
    case ScheduleKind::practical: return "practical";
    case ScheduleKind::ahat: return "ahat";
    case ScheduleKind::gd: return "gd";
    case ScheduleKind::custom: return "custom";
  }
  return "unknown";
}

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "theory") return ScheduleKind::theory;
  if (s == "practical") return ScheduleKind::practical;
  if (s == "ahat") return ScheduleKind::ahat;
  if (s == "gd") return ScheduleKind::gd;
  if (s == "custom") return ScheduleKind::custom;
  throw std::invalid_argument("unknown schedule: " + std::string(s));
}

/// A mu-sequence policy. Use the named constructors; fields not used by a kind are
/// ignored.
struct Schedule {
  ScheduleKind kind = ScheduleKind::theory;
  double mu0 = 0.1;
  double a = 1.0;         // theory, gd
  double eps = 0.0;       // ahat
  double beta = 0.15;     // gd
  double delta = 0.05;    // gd
  double factor = 0.0;    // custom: mu_{k+1} = mu_k / factor
  std::function<double(double)> step;  // custom, overrides factor when set

  static Schedule theory(double a, double mu0) {
    Schedule s;
    s.kind = ScheduleKind::theory;
    s.a = a;
    s.mu0 = mu0;
    return s;
  }
  static Schedule practical(double mu0 = 1.0 / 27.0) {
    Schedule s;
    s.kind = ScheduleKind::practical;
    s.mu0 = mu0;
    return s;
  }
  /// eps < 0 selects the default eps = mu0/4.
  static Schedule ahat(double mu0, double eps = -1.0) {
    Schedule s;
    s.kind = ScheduleKind::ahat;
    s.mu0 = mu0;
    s.eps = eps < 0.0 ? 0.25 * mu0 : eps;
    return s;
  }
  static Schedule gd(double a, double beta, double delta, double mu0) {
    Schedule s;
    s.kind = ScheduleKind::gd;
    s.a = a;
    s.beta = beta;
    s.delta = delta;
    s.mu0 = mu0;
    return s;
  }
  static Schedule custom_factor(double mu0, double factor) {
    Schedule s;
    s.kind = ScheduleKind::custom;
    s.mu0 = mu0;
    s.factor = factor;
    return s;
  }
  static Schedule custom(double mu0, std::function<double(double)> step) {
    Schedule s;
    s.kind = ScheduleKind::custom;
    s.mu0 = mu0;
    s.step = std::move(step);
    return s;
  }

  /// Surrogate for a used by the ahat and practical rates.
  [[nodiscard]] double a_hat() const noexcept {
    if (kind == ScheduleKind::practical) return std::sqrt(5.0 * mu0);
    return std::sqrt(4.0 * (mu0 + eps));
  }
};

/// Admissible mu0 interval [lower, upper) (or [lower, upper] when upper_closed) and
/// the verdict for the schedule's own mu0.
struct Admissibility {
  bool ok = false;
  double lower = 0.0;
  double upper = 0.0;
  bool upper_closed = false;
  std::string violation;
};

/// [a^2/(4(a^2+1)^3), a^2/4).
[[nodiscard]] inline std::pair<double, double> theory_mu0_interval(const ModelParams& m) noexcept {
  const double s = m.a2() + 1.0;
  return {m.a2() / (4.0 * s * s * s), 0.25 * m.a2()};
}

namespace detail {

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

inline void check_interval(Admissibility& r, double mu0) {
  const bool below_upper = r.upper_closed ? mu0 <= r.upper : mu0 < r.upper;
  if (!(mu0 >= r.lower) || !below_upper) {
    r.ok = false;
    r.violation = "mu0 = " + fmt_double(mu0) + " outside [" + fmt_double(r.lower) + ", " +
                  fmt_double(r.upper) + (r.upper_closed ? "]" : ")");
  }
}

}  // namespace detail

inline Admissibility validate_mu0(const Schedule& sched, const ModelParams& m) {
  Admissibility r;
  r.ok = true;
  const double a2 = m.a2();
  const double s = a2 + 1.0;
  switch (sched.kind) {
    case ScheduleKind::theory:
    case ScheduleKind::practical:
    case ScheduleKind::ahat:
    case ScheduleKind::custom: {
      std::tie(r.lower, r.upper) = theory_mu0_interval(m);
      detail::check_interval(r, sched.mu0);
      if (r.ok && (sched.kind == ScheduleKind::practical || sched.kind == ScheduleKind::ahat) &&
          !(sched.a_hat() < m.a())) {
        r.ok = false;
        r.violation = "a_hat = " + detail::fmt_double(sched.a_hat()) + " is not below a";
      }
      break;
    }
    case ScheduleKind::gd: {
      const double b = sched.beta;
      const double d = sched.delta;
      if (!(b > 0.0 && b < 1.0) || !(d > 0.0 && d < 1.0)) {
        r.ok = false;
        r.violation = "beta and delta must lie in (0, 1)";
        return r;
      }
      r.lower = a2 * std::pow(1.0 + b, 4) / (4.0 * s * s * s * (1.0 - b) * (1.0 - b));
      r.upper = a2 * std::pow(1.0 - d, 3) * std::pow(1.0 - b, 4) / (4.0 * (1.0 + b) * (1.0 + b));
      const double ratio = (1.0 + b) / (1.0 - b);
      if (ratio * ratio > (1.0 - d) * s) {
        r.ok = false;
        r.violation = "((1+beta)/(1-beta))^2 exceeds (1-delta)(a^2+1)";
        return r;
      }
      detail::check_interval(r, sched.mu0);
      break;
    }
  }
  return r;
}

/// Interval [y_lb(mu_k)^2, mu_k) of admissible next weights for the flow homotopy.
[[nodiscard]] inline std::pair<double, double> theory_step_interval(double mu_k,
                                                                    const ModelParams& m) {
  const double a13 = std::cbrt(m.a());
  const double root = std::sqrt(std::max(0.0, a13 * a13 - std::cbrt(4.0 * mu_k)));
  const double lb = std::cbrt(0.25 * mu_k * mu_k) * (a13 - root) * (a13 - root);
  return {lb, mu_k};
}

[[nodiscard]] inline bool step_in_theory_interval(double mu_k, double mu_next,
                                                  const ModelParams& m) {
  const auto [lo, hi] = theory_step_interval(mu_k, m);
  return mu_next >= lo && mu_next < hi;
}

/// Next penalty weight. eps_k is required for the gd kind.
inline double next_mu(const Schedule& sched, double mu_k, std::optional<double> eps_k = {}) {
  if (!(mu_k > 0.0)) throw std::domain_error("next_mu: mu_k must be positive");
  constexpr double two_thirds = 2.0 / 3.0;
  const double mu43 = std::pow(mu_k, 4.0 / 3.0);
  switch (sched.kind) {
    case ScheduleKind::theory: return std::pow(2.0 / sched.a, two_thirds) * mu43;
    case ScheduleKind::practical:
    case ScheduleKind::ahat: return std::pow(2.0 / sched.a_hat(), two_thirds) * mu43;
    case ScheduleKind::gd: {
      if (!eps_k) throw std::domain_error("next_mu: gd schedule needs eps_k");
      const double q = *eps_k / mu_k;
      if (!(q < sched.a)) throw std::domain_error("next_mu: eps_k must be below a * mu_k");
      return std::pow(2.0 * mu_k * mu_k, two_thirds) * std::pow(sched.a + q, two_thirds) /
             std::pow(sched.a - q, 2.0 * two_thirds);
    }
    case ScheduleKind::custom: {
      if (sched.step) return sched.step(mu_k);
      if (!(sched.factor > 0.0)) throw std::domain_error("next_mu: custom factor must be positive");
      return mu_k / sched.factor;
    }
  }
  throw std::invalid_argument("next_mu: unknown schedule");
}

struct GdStageParams {
  double eps = 0.0;
  double eta = 0.0;
};

/// eps_k = min(beta a mu_k, mu_k^{3/2}), eta_k = 1/L(mu_k).
inline GdStageParams gd_stage_params(double mu_k, const ModelParams& m, double beta) {
  if (!(mu_k > 0.0)) throw std::domain_error("gd_stage_params: mu_k must be positive");
  if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("gd_stage_params: beta must lie in (0, 1)");
  return {std::min(beta * m.a() * mu_k, std::pow(mu_k, 1.5)), 1.0 / smoothness_bound(mu_k, m)};
}

/// Number of gd outer iterations after which the iterate is eps_dist-close to W_G.
inline std::size_t outer_iteration_bound(double mu0, double a, double delta, double beta,
                                         double eps_dist) {
  const double a2 = a * a;
  const double e2 = eps_dist * eps_dist;
  const double terms[] = {
      std::log(mu0 / (beta * beta * a2)),
      std::log(72.0 * mu0 / (a2 * (1.0 - std::pow(0.5, 0.25)))),
      std::log(3.0 * (4.0 - delta) * mu0 / e2),
      0.5 * std::log(46656.0 * mu0 * mu0 / (a2 * e2)),
      std::log(46656.0 * mu0 * mu0 * mu0 / (a2 * a2 * e2)) / 3.0,
  };
  const double worst = *std::max_element(std::begin(terms), std::end(terms));
  const double k = std::ceil(std::max(0.0, worst / std::log(1.0 / (1.0 - delta))));
  return static_cast<std::size_t>(k);
}

[[nodiscard]] inline double distance_to(const Point& p, const Point& ref) noexcept {
  return std::hypot(p.x - ref.x, p.y - ref.y);
}

/// Frobenius distance |W(p) - W_G| = sqrt((x - a)^2 + y^2).
[[nodiscard]] inline double distance_to_global(const Point& p, const ModelParams& m) noexcept {
  return distance_to(p, global_optimum(m));
}

struct StopRule {
  double mu_floor = 1e-12;
  std::size_t max_stages = 200;
  std::optional<double> dist_tol;
};

enum class StopReason { mu_floor, stage_cap, dist_reached, failure };

[[nodiscard]] inline std::string_view to_string(StopReason r) noexcept {
  switch (r) {
    case StopReason::mu_floor: return "mu_floor";
    case StopReason::stage_cap: return "stage_cap";
    case StopReason::dist_reached: return "dist_reached";
    case StopReason::failure: return "failure";
  }
  return "unknown";
}

struct StageRecord {
  std::size_t k = 0;
  double mu = 0.0;
  std::optional<double> eps;
  std::optional<double> eta;
  Point start;
  Point end;
  std::size_t inner_steps = 0;
  double grad_norm = 0.0;
  bool converged = false;
  double g_start = 0.0;
  double g_end = 0.0;
  std::size_t perturbations = 0;
  std::vector<PathPoint> path;
};

struct HomotopyReport {
  Schedule schedule;
  bool admissible = false;
  std::string violation;
  Point reference;  // target the distance is measured to
  std::vector<StageRecord> stages;
  Point final;
  double dist_to_global = 0.0;
  std::size_t total_inner_steps = 0;
  StopReason stop_reason = StopReason::mu_floor;
  std::string failure;
};

namespace detail {

/// Admissibility of mu0 plus, for custom schedules, of every step of the sequence
/// down to the floor.
inline Admissibility check_schedule(const Schedule& sched, const ModelParams& m,
                                    const StopRule& stop) {
  auto r = validate_mu0(sched, m);
  if (!r.ok || sched.kind != ScheduleKind::custom) return r;
  double mu = sched.mu0;
  for (std::size_t k = 0; k + 1 < stop.max_stages && mu >= stop.mu_floor; ++k) {
    const double next = next_mu(sched, mu);
    if (!step_in_theory_interval(mu, next, m)) {
      r.ok = false;
      r.violation = "custom step " + fmt_double(mu) + " -> " + fmt_double(next) +
                    " leaves the admissible decay interval";
      return r;
    }
    mu = next;
  }
  return r;
}

template <class StageSolver, class NextMu>
HomotopyReport run_homotopy(HomotopyReport rep, double mu0, Point w0, const SecondMoment& loss,
                            const StopRule& stop, StageSolver&& solve_stage, NextMu&& advance) {
  if (!w0.is_finite()) throw std::invalid_argument("homotopy: non-finite initial point");
  if (!(mu0 > 0.0) || !std::isfinite(mu0)) {
    throw std::invalid_argument("homotopy: mu0 must be positive and finite");
  }
  if (stop.max_stages < 1) throw std::invalid_argument("homotopy: max_stages must be >= 1");
  rep.reference = enumeration_oracle(loss).winner;

  double mu = mu0;
  Point w = w0;
  rep.final = w0;
  rep.dist_to_global = distance_to(w0, rep.reference);
  for (std::size_t k = 0;; ++k) {
    StageRecord st;
    st.k = k;
    st.mu = mu;
    st.start = w;
    const PenalizedObjective g{loss, mu};
    st.g_start = g.value(w);
    try {
      solve_stage(g, st);
    } catch (const NumericFailure& e) {
      rep.final = e.last_finite();
      rep.dist_to_global = distance_to(rep.final, rep.reference);
      rep.stop_reason = StopReason::failure;
      rep.failure = e.what();
      return rep;
    }
    st.g_end = g.value(st.end);
    w = st.end;
    rep.total_inner_steps += st.inner_steps;
    rep.final = w;
    rep.dist_to_global = distance_to(w, rep.reference);
    const StageRecord& done = rep.stages.emplace_back(std::move(st));

    if (stop.dist_tol && rep.dist_to_global <= *stop.dist_tol) {
      rep.stop_reason = StopReason::dist_reached;
      return rep;
    }
    if (k + 1 >= stop.max_stages) {
      rep.stop_reason = StopReason::stage_cap;
      return rep;
    }
    const double next = advance(mu, done);
    if (!(next < stop.mu_floor) && !(next > 0.0 && std::isfinite(next))) {
      rep.stop_reason = StopReason::failure;
      rep.failure = "schedule produced an invalid weight " + fmt_double(next);
      return rep;
    }
    if (next < stop.mu_floor) {
      rep.stop_reason = StopReason::mu_floor;
      return rep;
    }
    mu = next;
  }
}

}  // namespace detail

/// Warm-started gradient-flow homotopy. Inadmissible schedules throw
/// std::invalid_argument unless force is set; the report records admissibility.
inline HomotopyReport run_homotopy_flow(const Schedule& sched, Point w0, const SecondMoment& loss,
                                        const ModelParams& m, const StopRule& stop = {},
                                        const FlowOptions& flow = {}, bool force = false) {
  if (sched.kind == ScheduleKind::gd) {
    throw std::invalid_argument("run_homotopy_flow: gd schedules run with run_homotopy_gd");
  }
  loss.validate();
  HomotopyReport rep;
  rep.schedule = sched;
  const auto adm = detail::check_schedule(sched, m, stop);
  rep.admissible = adm.ok;
  rep.violation = adm.violation;
  if (!adm.ok && !force) {
    throw std::invalid_argument("inadmissible schedule: " + adm.violation);
  }
  auto solve = [&](const PenalizedObjective& g, StageRecord& st) {
    auto r = gradient_flow(g, st.start, flow);
    st.end = r.point;
    st.inner_steps = r.steps_taken;
    st.grad_norm = r.grad_norm;
    st.converged = r.converged;
    st.perturbations = r.perturbations;
    st.path = std::move(r.path);
  };
  auto advance = [&](double mu, const StageRecord&) { return next_mu(sched, mu); };
  return detail::run_homotopy(std::move(rep), sched.mu0, w0, loss, stop, solve, advance);
}

/// Gradient-descent homotopy with eps_k = min(beta a mu_k, mu_k^{3/2}), step 1/L_k and
/// the matching mu update, on the population loss of a.
inline HomotopyReport run_homotopy_gd(double a, double beta, double delta, double mu0, Point w0,
                                      const StopRule& stop = {}, bool force = false,
                                      std::size_t path_stride = 0) {
  const ModelParams m(a);
  const auto sched = Schedule::gd(a, beta, delta, mu0);
  HomotopyReport rep;
  rep.schedule = sched;
  const auto adm = validate_mu0(sched, m);
  rep.admissible = adm.ok;
  rep.violation = adm.violation;
  if (!adm.ok && !force) {
    throw std::invalid_argument("inadmissible schedule: " + adm.violation);
  }
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");

  auto solve = [&](const PenalizedObjective& g, StageRecord& st) {
    const auto prm = gd_stage_params(st.mu, m, beta);
    st.eps = prm.eps;
    st.eta = prm.eta;
    DescentOptions opts;
    opts.step = prm.eta;
    opts.eps = prm.eps;
    opts.record_path = path_stride > 0;
    opts.path_stride = std::max<std::size_t>(path_stride, 1);
    auto r = gradient_descent(g, st.start, opts);
    st.end = r.point;
    st.inner_steps = r.steps_taken;
    st.grad_norm = r.grad_norm;
    st.converged = r.converged;
    st.path = std::move(r.path);
  };
  auto advance = [&](double mu, const StageRecord& st) { return next_mu(sched, mu, st.eps); };
  return detail::run_homotopy(std::move(rep), mu0, w0, SecondMoment::population(m), stop, solve,
                              advance);
}

}  // namespace dagho
