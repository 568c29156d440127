#pragma once

// Bivariate linear SEM X1 = N1, X2 = a*X1 + N2 and the penalized least-squares
// objective g_mu(x, y) = mu * f(x, y) + h(x, y) over W(x, y) = (0 x; y 0).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dagho {

/// Ground-truth edge weight of X1 -> X2. Always positive and finite.
class ModelParams {
 public:
  explicit ModelParams(double a) : a_(a) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw std::invalid_argument("ModelParams: a must be positive and finite, got " +
                                  std::to_string(a));
    }
  }

  [[nodiscard]] double a() const noexcept { return a_; }
  [[nodiscard]] double a2() const noexcept { return a_ * a_; }
  /// y-coordinate of the spurious minimizer's limit, a / (a^2 + 1).
  [[nodiscard]] double spurious_y() const noexcept { return a_ / (a_ * a_ + 1.0); }

 private:
  double a_;
};

/// Parameters (x, y) of W = (0 x; y 0).
struct Point {
  double x = 0.0;
  double y = 0.0;

  [[nodiscard]] bool is_finite() const noexcept { return std::isfinite(x) && std::isfinite(y); }
  friend bool operator==(const Point&, const Point&) = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  [[nodiscard]] double norm() const noexcept { return std::hypot(x, y); }
};

/// Symmetric 2x2 matrix.
struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  [[nodiscard]] double trace() const noexcept { return xx + yy; }
  [[nodiscard]] double det() const noexcept { return xx * yy - xy * xy; }
  [[nodiscard]] std::array<double, 2> eigenvalues() const noexcept {
    const double mean = 0.5 * (xx + yy);
    const double rad = std::hypot(0.5 * (xx - yy), xy);
    return {mean - rad, mean + rad};
  }
  [[nodiscard]] double spectral_norm() const noexcept {
    const auto ev = eigenvalues();
    return std::max(std::abs(ev[0]), std::abs(ev[1]));
  }
};

/// Global optimum W_G = (a, 0).
[[nodiscard]] inline Point global_optimum(const ModelParams& m) noexcept { return {m.a(), 0.0}; }

enum class MomentOrigin { population, empirical };

/// Second-moment matrix of X, a sufficient statistic for the least-squares score.
struct SecondMoment {
  double s11 = 1.0;
  double s12 = 0.0;
  double s22 = 1.0;
  MomentOrigin origin = MomentOrigin::population;
  std::size_t samples = 0;  // empirical only

  static SecondMoment population(const ModelParams& m) noexcept {
    return {1.0, m.a(), m.a2() + 1.0, MomentOrigin::population, 0};
  }

  static SecondMoment empirical(double s11, double s12, double s22, std::size_t n) {
    SecondMoment sm{s11, s12, s22, MomentOrigin::empirical, n};
    sm.validate();
    return sm;
  }

  void validate() const {
    if (!std::isfinite(s11) || !std::isfinite(s12) || !std::isfinite(s22)) {
      throw std::invalid_argument("SecondMoment: non-finite entry");
    }
    const double slack = 1e-12 * std::max(1.0, s11 * s22);
    if (s11 < 0.0 || s22 < 0.0 || s11 * s22 - s12 * s12 < -slack) {
      throw std::invalid_argument("SecondMoment: matrix is not positive semidefinite");
    }
  }
};

/// f(x, y) = ((1 - a y)^2 + y^2 + (a - x)^2 + 1) / 2.
[[nodiscard]] inline double population_loss(const Point& p, const ModelParams& m) noexcept {
  const double a = m.a();
  const double u = 1.0 - a * p.y;
  const double v = a - p.x;
  return 0.5 * (u * u + p.y * p.y + v * v + 1.0);
}

/// f(W) = E||X - W^T X||^2 / 2 written in the moments of X:
/// (s11 (1 + x^2) + s22 (1 + y^2) - 2 s12 (x + y)) / 2.
[[nodiscard]] inline double loss_from_moments(const Point& p, const SecondMoment& sm) noexcept {
  return 0.5 * (sm.s11 * (1.0 + p.x * p.x) + sm.s22 * (1.0 + p.y * p.y) -
                2.0 * sm.s12 * (p.x + p.y));
}

/// h(W) = x^2 y^2 / 2, zero exactly on DAGs.
[[nodiscard]] inline double acyclicity_penalty(const Point& p) noexcept {
  const double xy = p.x * p.y;
  return 0.5 * xy * xy;
}

[[nodiscard]] inline double penalized_objective(const Point& p, double mu,
                                                const SecondMoment& sm) noexcept {
  return mu * loss_from_moments(p, sm) + acyclicity_penalty(p);
}

[[nodiscard]] inline Vec2 gradient(const Point& p, double mu, const SecondMoment& sm) noexcept {
  return {mu * (sm.s11 * p.x - sm.s12) + p.y * p.y * p.x,
          mu * (sm.s22 * p.y - sm.s12) + p.x * p.x * p.y};
}

[[nodiscard]] inline Sym2 hessian(const Point& p, double mu, const SecondMoment& sm) noexcept {
  return {mu * sm.s11 + p.y * p.y, 2.0 * p.x * p.y, mu * sm.s22 + p.x * p.x};
}

/// Lipschitz constant of the gradient on A = [0, a] x [0, a/(a^2+1)].
[[nodiscard]] inline double smoothness_bound(double mu, const ModelParams& m) noexcept {
  return mu * (m.a2() + 1.0) + 3.0 * m.a2();
}

/// g_mu for a fixed loss and penalty weight; the callable the inner solvers consume.
struct PenalizedObjective {
  SecondMoment loss;
  double mu = 1.0;

  [[nodiscard]] double f(const Point& p) const noexcept { return loss_from_moments(p, loss); }
  [[nodiscard]] double h(const Point& p) const noexcept { return acyclicity_penalty(p); }
  [[nodiscard]] double value(const Point& p) const noexcept {
    return penalized_objective(p, mu, loss);
  }
  [[nodiscard]] Vec2 gradient(const Point& p) const noexcept { return dagho::gradient(p, mu, loss); }
  [[nodiscard]] Sym2 hessian(const Point& p) const noexcept { return dagho::hessian(p, mu, loss); }
};

// ---------------------------------------------------------------------------
// Synthetic data

enum class NoiseKind { gaussian, uniform };

[[nodiscard]] inline std::string_view to_string(NoiseKind k) noexcept {
  return k == NoiseKind::gaussian ? "gaussian" : "uniform";
}

inline NoiseKind parse_noise_kind(std::string_view s) {
  if (s == "gaussian") return NoiseKind::gaussian;
  if (s == "uniform") return NoiseKind::uniform;
  throw std::invalid_argument("unknown noise kind: " + std::string(s));
}

struct Sample {
  double x1 = 0.0;
  double x2 = 0.0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  std::vector<Sample> rows;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::gaussian;
};

/// Draws n samples of the SEM with zero-mean, unit-variance noise. Uniform noise is
/// supported on [-sqrt(3), sqrt(3)].
inline Dataset sample_sem(const ModelParams& m, std::size_t n, NoiseKind noise,
                          std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_sem: need at least 2 samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double half_width = std::sqrt(3.0);
  std::uniform_real_distribution<double> uniform(-half_width, half_width);
  auto draw = [&] { return noise == NoiseKind::gaussian ? normal(rng) : uniform(rng); };

  Dataset ds{{}, seed, noise};
  ds.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double n1 = draw();
    const double n2 = draw();
    ds.rows.push_back({n1, m.a() * n1 + n2});
  }
  return ds;
}

/// Uncentered moments: the model has E[N] = 0, so no mean is subtracted.
inline SecondMoment moments_of(const Dataset& ds) {
  if (ds.rows.size() < 2) throw std::invalid_argument("moments_of: need at least 2 samples");
  double s11 = 0.0, s12 = 0.0, s22 = 0.0;
  for (const auto& r : ds.rows) {
    s11 += r.x1 * r.x1;
    s12 += r.x1 * r.x2;
    s22 += r.x2 * r.x2;
  }
  const auto n = static_cast<double>(ds.rows.size());
  return SecondMoment::empirical(s11 / n, s12 / n, s22 / n, ds.rows.size());
}

// ---------------------------------------------------------------------------
// Enumeration oracle: with two nodes there are only two DAGs to fit.

enum class Edge { x1_to_x2, x2_to_x1 };

[[nodiscard]] inline std::string_view to_string(Edge e) noexcept {
  return e == Edge::x1_to_x2 ? "x1->x2" : "x2->x1";
}

struct OracleResult {
  Point winner;
  double score = 0.0;
  Point loser;
  double loser_score = 0.0;
  Edge structure = Edge::x1_to_x2;
};

/// Fits f on {y = 0} and on {x = 0} in closed form and returns the better fit.
/// Ties go to the x1 -> x2 structure.
inline OracleResult enumeration_oracle(const SecondMoment& sm) {
  sm.validate();
  const double x = sm.s11 > 0.0 ? sm.s12 / sm.s11 : 0.0;
  const double y = sm.s22 > 0.0 ? sm.s12 / sm.s22 : 0.0;
  const Point on_x{x, 0.0};
  const Point on_y{0.0, y};
  const double fx = loss_from_moments(on_x, sm);
  const double fy = loss_from_moments(on_y, sm);
  if (fx <= fy) return {on_x, fx, on_y, fy, Edge::x1_to_x2};
  return {on_y, fy, on_x, fx, Edge::x2_to_x1};
}

}  // namespace dagho
