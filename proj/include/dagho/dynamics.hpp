#pragma once

// Inner solvers for one penalty weight: gradient flow integrated with an adaptive
// Dormand-Prince 4(5) pair, and fixed-step gradient descent to eps-stationarity.

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "dagho/model.hpp"

namespace dagho {

template <class F>
concept SmoothObjective = requires(const F& f, const Point& p) {
  { f.value(p) } -> std::convertible_to<double>;
  { f.gradient(p) } -> std::convertible_to<Vec2>;
};

struct FlowOptions {
  double grad_tol = 1e-10;
  double max_time = 1e7;
  double rel_step_tol = 1e-9;
  std::size_t max_steps = 20'000'000;
  bool record_path = false;
  std::size_t path_stride = 10;

  void validate() const {
    if (!(grad_tol > 0.0)) throw std::invalid_argument("FlowOptions: grad_tol must be positive");
    if (!(max_time > 0.0)) throw std::invalid_argument("FlowOptions: max_time must be positive");
    if (!(rel_step_tol > 0.0)) {
      throw std::invalid_argument("FlowOptions: rel_step_tol must be positive");
    }
    if (max_steps < 1) throw std::invalid_argument("FlowOptions: max_steps must be >= 1");
    if (path_stride < 1) throw std::invalid_argument("FlowOptions: path_stride must be >= 1");
  }
};

struct DescentOptions {
  double step = 0.1;
  double eps = 1e-6;
  std::size_t max_iters = 50'000'000;
  bool record_path = false;
  std::size_t path_stride = 1;

  void validate() const {
    if (!(step > 0.0)) throw std::invalid_argument("DescentOptions: step must be positive");
    if (!(eps > 0.0)) throw std::invalid_argument("DescentOptions: eps must be positive");
    if (path_stride < 1) throw std::invalid_argument("DescentOptions: path_stride must be >= 1");
  }
};

/// Recorded iterate; t is the flow time or the descent iteration index.
struct PathPoint {
  std::size_t step = 0;
  double t = 0.0;
  Point point;
};

struct SolveResult {
  Point point;
  double grad_norm = 0.0;
  std::size_t steps_taken = 0;
  bool converged = false;
  std::vector<PathPoint> path;
  /// Saddle-escape nudges applied by the flow.
  std::size_t perturbations = 0;
};

class NumericFailure : public std::runtime_error {
 public:
  NumericFailure(const std::string& what, Point last_finite)
      : std::runtime_error(what), last_finite_(last_finite) {}

  [[nodiscard]] Point last_finite() const noexcept { return last_finite_; }

 private:
  Point last_finite_;
};

namespace detail {

using State = std::array<double, 2>;

constexpr std::size_t plateau_window = 1000;
constexpr double plateau_decrease = 1e-14;
constexpr double saddle_nudge = 1e-9;

}  // namespace detail

/// Integrates dz/dt = -grad g(z) from z0 until |grad g| <= grad_tol or the time or
/// step budget runs out. Running out of budget is reported, not thrown.
template <SmoothObjective Objective>
SolveResult gradient_flow(const Objective& obj, Point z0, const FlowOptions& opts = {}) {
  namespace odeint = boost::numeric::odeint;
  opts.validate();
  if (!z0.is_finite()) throw std::invalid_argument("gradient_flow: non-finite start");

  SolveResult res;
  auto record = [&](std::size_t step, double t, const Point& p) {
    if (opts.record_path) res.path.push_back({step, t, p});
  };

  Point z = z0;
  double gn = obj.gradient(z).norm();
  record(0, 0.0, z);
  if (gn <= opts.grad_tol) {
    res.point = z;
    res.grad_norm = gn;
    res.converged = true;
    return res;
  }

  auto rhs = [&obj](const detail::State& s, detail::State& ds, double) {
    const Vec2 g = obj.gradient(Point{s[0], s[1]});
    ds[0] = -g.x;
    ds[1] = -g.y;
  };
  // Error is measured relative to the step increment rather than the state, so the
  // tolerance shrinks with the gradient and the step never settles on the edge of
  // the stability region near a minimum.
  using Dopri = odeint::runge_kutta_dopri5<detail::State>;
  using Checker = odeint::default_error_checker<double, Dopri::algebra_type,
                                                Dopri::operations_type>;
  odeint::controlled_runge_kutta<Dopri> stepper(
      Checker(1e-3 * opts.grad_tol, opts.rel_step_tol, 0.0, 1.0));

  detail::State s{z.x, z.y};
  double t = 0.0;
  double dt = 1e-3;
  std::size_t accepted = 0;
  std::size_t attempts = 0;
  std::deque<double> window{gn};
  std::size_t last_record = 0;

  while (gn > opts.grad_tol && t < opts.max_time && accepted < opts.max_steps) {
    dt = std::min(dt, opts.max_time - t);
    const detail::State before = s;
    if (stepper.try_step(rhs, s, t, dt) == odeint::fail) {
      if (++attempts > 1000 || !(dt > 0.0)) {
        throw NumericFailure("gradient_flow: step size underflow", Point{before[0], before[1]});
      }
      continue;
    }
    attempts = 0;
    ++accepted;
    z = Point{s[0], s[1]};
    if (!z.is_finite()) {
      throw NumericFailure("gradient_flow: non-finite state", Point{before[0], before[1]});
    }
    gn = obj.gradient(z).norm();
    if (accepted - last_record >= opts.path_stride) {
      record(accepted, t, z);
      last_record = accepted;
    }

    window.push_back(gn);
    if (window.size() > detail::plateau_window + 1) window.pop_front();
    if (window.size() == detail::plateau_window + 1 && gn > opts.grad_tol &&
        std::abs(window.front() - gn) < detail::plateau_decrease) {
      s[0] -= detail::saddle_nudge;
      z = Point{s[0], s[1]};
      gn = obj.gradient(z).norm();
      ++res.perturbations;
      window.assign(1, gn);
    }
  }

  if (opts.record_path && last_record != accepted) res.path.push_back({accepted, t, z});
  res.point = z;
  res.grad_norm = gn;
  res.steps_taken = accepted;
  res.converged = gn <= opts.grad_tol;
  return res;
}

/// w <- w - step * grad g(w) until |grad g| <= eps. Throws NumericFailure carrying
/// the last finite iterate if the iteration overflows.
template <SmoothObjective Objective>
SolveResult gradient_descent(const Objective& obj, Point w0, const DescentOptions& opts) {
  opts.validate();
  if (!w0.is_finite()) throw std::invalid_argument("gradient_descent: non-finite start");

  SolveResult res;
  Point w = w0;
  Vec2 g = obj.gradient(w);
  double gn = g.norm();
  if (opts.record_path) res.path.push_back({0, 0.0, w});

  std::size_t it = 0;
  while (gn > opts.eps && it < opts.max_iters) {
    const Point next{w.x - opts.step * g.x, w.y - opts.step * g.y};
    if (!next.is_finite()) throw NumericFailure("gradient_descent: non-finite iterate", w);
    w = next;
    ++it;
    g = obj.gradient(w);
    gn = g.norm();
    if (!std::isfinite(gn)) throw NumericFailure("gradient_descent: non-finite gradient", w);
    if (opts.record_path && (it % opts.path_stride == 0 || gn <= opts.eps)) {
      res.path.push_back({it, static_cast<double>(it), w});
    }
  }
  if (opts.record_path && res.path.back().step != it) {
    res.path.push_back({it, static_cast<double>(it), w});
  }
  res.point = w;
  res.grad_norm = gn;
  res.steps_taken = it;
  res.converged = gn <= opts.eps;
  return res;
}

}  // namespace dagho
