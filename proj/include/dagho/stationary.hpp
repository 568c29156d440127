#pragma once

// Landscape analysis of g_mu: the one-variable stationary equations r(y; mu) and
// t(x; mu), their perturbed forms, the threshold tau below which three stationary
// points exist, classification, and the regions used by the convergence theory.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dagho/model.hpp"

namespace dagho {

/// phi(z) = A/z - B - C/(z^2 + D)^2 with A, B, D > 0 and C >= 0.
///
/// Every stationary equation of the bivariate problem has this shape. phi decreases
/// on (0, lb], increases on [lb, ub] and decreases on [ub, inf), where lb and ub are
/// the roots of z^2 - k z + D = 0 with k = (4C/A)^{1/3}; when that quadratic has no
/// real root phi is strictly decreasing. Since lb * ub = D, lb <= sqrt(D) <= ub.
struct RationalEquation {
  double A = 1.0;
  double B = 1.0;
  double C = 0.0;
  double D = 1.0;

  [[nodiscard]] double operator()(double z) const noexcept {
    const double s = z * z + D;
    return A / z - B - C / (s * s);
  }

  [[nodiscard]] double derivative(double z) const noexcept {
    const double s = z * z + D;
    return -A / (z * z) + 4.0 * C * z / (s * s * s);
  }

  /// Endpoints of the interval where phi increases, or nullopt if phi is monotone.
  [[nodiscard]] std::optional<std::pair<double, double>> increasing_interval() const noexcept {
    if (A <= 0.0 || C <= 0.0) return std::nullopt;
    const double k = std::cbrt(4.0 * C / A);
    double disc = k * k - 4.0 * D;
    if (disc < -1e-12 * k * k) return std::nullopt;
    disc = std::max(disc, 0.0);
    const double r = std::sqrt(disc);
    return std::pair{0.5 * (k - r), 0.5 * (k + r)};
  }

  /// All roots in (0, A/B], ascending. A tangency, |phi| <= 1e-12 * A / z at an
  /// extremum, is reported as a single root at the extremum.
  [[nodiscard]] std::vector<double> roots() const;
};

namespace detail {

/// Bisection for a sign change of f on [lo, hi] with f(lo) > 0 >= f(hi).
template <class F>
double bisect_decreasing_sign(const F& f, double lo, double hi, bool increasing = false) {
  auto positive_side = [&](double v) { return increasing ? v < 0.0 : v > 0.0; };
  for (int it = 0; it < 200; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (positive_side(f(mid))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::abs(f(lo)) < std::abs(f(hi)) ? lo : hi;
}

constexpr double tangency_rel_tol = 1e-12;
constexpr double merge_separation = 1e-8;

}  // namespace detail

inline std::vector<double> RationalEquation::roots() const {
  std::vector<double> out;
  if (!(A > 0.0) || !(B > 0.0)) return out;  // phi < 0 everywhere
  const double zmax = A / B;
  const double zmin = 1e-15 * zmax;
  const auto& phi = *this;
  auto is_tangent = [&](double z) {
    return std::abs(phi(z)) <= detail::tangency_rel_tol * (A / z);
  };
  auto descending_root = [&](double lo, double hi) {
    if (phi(hi) == 0.0) return hi;
    return detail::bisect_decreasing_sign(phi, lo, hi);
  };

  const auto inc = increasing_interval();
  if (!inc || inc->first >= zmax) {
    out.push_back(descending_root(zmin, zmax));
    return out;
  }
  const double lb = std::max(inc->first, zmin);
  const double ub = std::min(inc->second, zmax);
  const double f_lb = phi(lb);
  const double f_ub = phi(ub);

  if (is_tangent(lb)) {
    out.push_back(lb);
  } else if (f_lb < 0.0) {
    out.push_back(descending_root(zmin, lb));
  }
  if (!is_tangent(lb) && !is_tangent(ub) && f_lb < 0.0 && f_ub > 0.0) {
    out.push_back(detail::bisect_decreasing_sign(phi, lb, ub, /*increasing=*/true));
  }
  if (ub < zmax) {
    if (is_tangent(ub)) {
      out.push_back(ub);
    } else if (f_ub > 0.0) {
      out.push_back(descending_root(ub, zmax));
    }
  }

  // Pairs closer than the merge separation are one double root.
  std::vector<double> merged;
  for (double z : out) {
    if (!merged.empty() && z - merged.back() < detail::merge_separation) {
      merged.back() = (merged.back() <= lb && lb <= z) ? lb : ub;
    } else {
      merged.push_back(z);
    }
  }
  return merged;
}

// ---------------------------------------------------------------------------
// The stationary equations

/// r(y; mu) = a/y - mu a^2/(y^2 + mu)^2 - (a^2 + 1); its roots are the y-coordinates
/// of the stationary points.
[[nodiscard]] inline RationalEquation r_equation(double mu, const ModelParams& m) noexcept {
  return {m.a(), m.a2() + 1.0, mu * m.a2(), mu};
}

/// t(x; mu) = a/x - mu a^2/(mu(a^2 + 1) + x^2)^2 - 1.
[[nodiscard]] inline RationalEquation t_equation(double mu, const ModelParams& m) noexcept {
  return {m.a(), 1.0, mu * m.a2(), mu * (m.a2() + 1.0)};
}

inline double eval_r(double y, double mu, const ModelParams& m) {
  if (!(y > 0.0)) throw std::domain_error("eval_r: y must be positive");
  return r_equation(mu, m)(y);
}

inline double eval_t(double x, double mu, const ModelParams& m) {
  if (!(x > 0.0)) throw std::domain_error("eval_t: x must be positive");
  return t_equation(mu, m)(x);
}

enum class Variable { y, x };

struct CurvatureBounds {
  double lower = 0.0;
  double upper = 0.0;
  Variable variable = Variable::y;
};

/// Interval (y_lb, y_ub) on which r increases; nullopt iff mu > a^2/4.
inline std::optional<CurvatureBounds> y_curvature_bounds(double mu, const ModelParams& m) {
  if (mu > 0.25 * m.a2()) return std::nullopt;
  const double c = std::cbrt(4.0 * mu);
  const double a13 = std::cbrt(m.a());
  const double root = std::sqrt(std::max(0.0, a13 * a13 - c));
  return CurvatureBounds{0.5 * c * (a13 - root), 0.5 * c * (a13 + root), Variable::y};
}

/// Interval (x_lb, x_ub) on which t increases; nullopt iff mu > a^2/(4(a^2+1)^3).
inline std::optional<CurvatureBounds> x_curvature_bounds(double mu, const ModelParams& m) {
  const double s = m.a2() + 1.0;
  if (mu > m.a2() / (4.0 * s * s * s)) return std::nullopt;
  const double c = std::cbrt(4.0 * mu * m.a());
  const double root = std::sqrt(std::max(0.0, 1.0 - std::cbrt(4.0 * mu) * s / std::cbrt(m.a2())));
  return CurvatureBounds{0.5 * c * (1.0 - root), 0.5 * c * (1.0 + root), Variable::x};
}

// ---------------------------------------------------------------------------
// Threshold tau

struct Threshold {
  double tau = 0.0;
  double a = 0.0;
};

/// p(mu) = r(y_ub(mu); mu), strictly decreasing with a unique zero at tau.
inline double tau_indicator(double mu, const ModelParams& m) {
  const auto b = y_curvature_bounds(mu, m);
  if (!b) throw std::domain_error("tau_indicator: mu exceeds a^2/4");
  return r_equation(mu, m)(b->upper);
}

/// Penalty weight at which the second and third stationary points are born.
inline Threshold critical_tau(const ModelParams& m) {
  const double s = m.a2() + 1.0;
  double hi = m.a2() / (4.0 * s * s * s);
  if (tau_indicator(hi, m) > 0.0) hi = 0.25 * m.a2();
  double lo = 1e-18 * m.a2();
  while (tau_indicator(lo, m) <= 0.0) lo *= 0.5;

  for (int it = 0; it < 400; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (tau_indicator(mid, m) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double tau = std::abs(tau_indicator(lo, m)) < std::abs(tau_indicator(hi, m)) ? lo : hi;
  return {tau, m.a()};
}

// ---------------------------------------------------------------------------
// Stationary points

enum class StationaryKind { minimum, saddle, degenerate };
enum class Branch { star, double_star, triple_star };

[[nodiscard]] inline std::string_view to_string(StationaryKind k) noexcept {
  switch (k) {
    case StationaryKind::minimum: return "minimum";
    case StationaryKind::saddle: return "saddle";
    case StationaryKind::degenerate: return "degenerate";
  }
  return "unknown";
}

[[nodiscard]] inline std::string_view to_string(Branch b) noexcept {
  switch (b) {
    case Branch::star: return "star";
    case Branch::double_star: return "double_star";
    case Branch::triple_star: return "triple_star";
  }
  return "unknown";
}

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Minimum if det(Hessian) > 0, saddle if det < 0, degenerate if |det| <= 1e-12.
/// The trace of the Hessian is always positive, so no maxima exist.
inline StationaryKind classify_stationary(const Point& p, double mu, const ModelParams& m,
                                          double stationarity_tol = 1e-8) {
  const auto pop = SecondMoment::population(m);
  const double gn = gradient(p, mu, pop).norm();
  if (!(gn <= stationarity_tol)) {
    throw PreconditionError("classify_stationary: point is not stationary (|grad| = " +
                            std::to_string(gn) + ")");
  }
  const double det = hessian(p, mu, pop).det();
  if (std::abs(det) <= 1e-12) return StationaryKind::degenerate;
  return det > 0.0 ? StationaryKind::minimum : StationaryKind::saddle;
}

struct StationaryPoint {
  Point point;
  StationaryKind kind = StationaryKind::minimum;
  Branch branch = Branch::star;
  double mu = 0.0;
};

/// 1 to 3 stationary points of g_mu ordered star, double_star, triple_star
/// (ascending y, descending x).
struct StationarySet {
  double mu = 0.0;
  double a = 0.0;
  std::vector<StationaryPoint> points;

  [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
  [[nodiscard]] const StationaryPoint& star() const { return points.at(0); }
  [[nodiscard]] const StationaryPoint& saddle() const { return points.at(1); }
  [[nodiscard]] const StationaryPoint& spurious() const { return points.at(2); }
};

/// Solves grad g_mu = 0 for the population loss: roots of r(y; mu) on (0, a/(a^2+1))
/// by bisection on its monotone pieces, then x = mu a/(mu + y^2).
inline StationarySet solve_stationary_points(double mu, const ModelParams& m) {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("solve_stationary_points: mu must be positive and finite");
  }
  StationarySet set{mu, m.a(), {}};
  const auto ys = r_equation(mu, m).roots();
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double y = ys[i];
    const Point p{mu * m.a() / (mu + y * y), y};
    const auto kind = classify_stationary(p, mu, m, 1e-6 * std::max(1.0, mu * m.a()));
    set.points.push_back({p, kind, static_cast<Branch>(i), mu});
  }
  return set;
}

// ---------------------------------------------------------------------------
// Perturbed equations for eps-stationary points

enum class Perturbation { r_eps, t_eps, r_eps_minus, t_eps_minus, r_beta, t_beta };

/// The perturbed stationary equations as rational equations.
///   r_eps:       x = (mu a - eps)/(mu + y^2),  y = (mu a + eps)/(mu(a^2+1) + x^2), in y
///   t_eps:       same system, in x
///   r_eps_minus: x = (mu a + eps)/(mu + y^2),  y = (mu a - eps)/(mu(a^2+1) + x^2), in y
///   t_eps_minus: same system, in x
///   r_beta, t_beta: r_eps, t_eps at the worst case eps = beta a mu
inline RationalEquation perturbed_equation(double mu, const ModelParams& m, double eps,
                                           Perturbation which, double beta = 0.0) {
  const double a = m.a();
  const double s = m.a2() + 1.0;
  const double q = eps / mu;
  auto sq = [](double v) { return v * v; };
  switch (which) {
    case Perturbation::r_eps: return {a + q, s, sq(mu * a - eps) / mu, mu};
    case Perturbation::t_eps: return {a - q, 1.0, sq(mu * a + eps) / mu, mu * s};
    case Perturbation::r_eps_minus: return {a - q, s, sq(mu * a + eps) / mu, mu};
    case Perturbation::t_eps_minus: return {a + q, 1.0, sq(mu * a - eps) / mu, mu * s};
    case Perturbation::r_beta: return {a * (1.0 + beta), s, mu * m.a2() * sq(1.0 - beta), mu};
    case Perturbation::t_beta:
      return {a * (1.0 - beta), 1.0, mu * m.a2() * sq(1.0 + beta), mu * s};
  }
  throw std::invalid_argument("perturbed_equation: unknown form");
}

inline double eval_perturbed(double z, double mu, const ModelParams& m, double eps,
                             Perturbation which, double beta = 0.0) {
  if (!(z > 0.0)) throw std::domain_error("eval_perturbed: argument must be positive");
  if (eps < 0.0) throw std::domain_error("eval_perturbed: eps must be nonnegative");
  if ((which == Perturbation::r_beta || which == Perturbation::t_beta) &&
      !(beta > 0.0 && beta < 1.0)) {
    throw std::domain_error("eval_perturbed: beta must lie in (0, 1)");
  }
  return perturbed_equation(mu, m, eps, which, beta)(z);
}

/// Solutions of the eps-perturbed stationary system, ordered by ascending y.
/// `minus` selects the system with the signs of eps swapped.
inline std::vector<Point> solve_perturbed_system(double mu, const ModelParams& m, double eps,
                                                 bool minus = false) {
  const auto eq = perturbed_equation(mu, m, eps,
                                     minus ? Perturbation::r_eps_minus : Perturbation::r_eps);
  const double x_num = mu * m.a() + (minus ? eps : -eps);
  std::vector<Point> pts;
  for (double y : eq.roots()) pts.push_back({x_num / (mu + y * y), y});
  return pts;
}

// ---------------------------------------------------------------------------
// Regions

/// Membership flags. Optional flags are empty when the region is undefined at this
/// (mu, eps): B-regions need mu < tau, A1 and A2 need the perturbed extremal points.
struct RegionFlags {
  bool in_A = false;
  bool in_A_eps = false;
  std::optional<bool> in_A1;
  std::optional<bool> in_A2;
  std::optional<bool> in_B_mu;
  std::optional<bool> in_B_mu_eps;
};

inline bool in_region_A(const Point& p, const ModelParams& m) noexcept {
  return p.x >= 0.0 && p.x <= m.a() && p.y >= 0.0 && p.y <= m.spurious_y();
}

/// Outer box of the eps-stationary set, which contains {|grad g_mu| <= eps}.
inline bool in_region_A_eps(const Point& p, double mu, const ModelParams& m,
                            double eps) noexcept {
  const double lo = mu * m.a() - eps;
  const double hi = mu * m.a() + eps;
  const double dx = mu + p.y * p.y;
  const double dy = p.x * p.x + mu * (m.a2() + 1.0);
  return lo / dx <= p.x && p.x <= hi / dx && lo / dy <= p.y && p.y <= hi / dy;
}

inline RegionFlags region_membership(const Point& p, double mu, const ModelParams& m,
                                     double eps) {
  RegionFlags f;
  f.in_A = in_region_A(p, m);
  f.in_A_eps = in_region_A_eps(p, mu, m, eps);

  const auto ext = solve_perturbed_system(mu, m, eps);
  if (!ext.empty()) {
    f.in_A1 = f.in_A_eps && p.x >= ext[0].x && p.y <= ext[0].y;
  }
  if (ext.size() >= 2) {
    f.in_A2 = f.in_A_eps && p.x <= ext[1].x && p.y >= ext[1].y;
  }

  const auto set = solve_stationary_points(mu, m);
  if (set.size() == 3) {
    const Point& saddle = set.saddle().point;
    f.in_B_mu = saddle.x < p.x && p.x <= m.a() && 0.0 <= p.y && p.y < saddle.y;
    if (ext.size() >= 2) {
      f.in_B_mu_eps = ext[1].x < p.x && p.x <= m.a() && 0.0 <= p.y && p.y < ext[1].y;
    }
  }
  return f;
}

}  // namespace dagho
