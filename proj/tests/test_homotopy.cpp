#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dagho/homotopy.hpp"

using namespace dagho;

TEST(ValidateMu0, TheoryIntervals) {
  const auto r2 = validate_mu0(Schedule::theory(2.0, 0.5), ModelParams(2.0));
  EXPECT_TRUE(r2.ok);
  EXPECT_NEAR(r2.lower, 0.008, 1e-15);
  EXPECT_NEAR(r2.upper, 1.0, 1e-15);
  EXPECT_FALSE(r2.upper_closed);

  const auto r1 = validate_mu0(Schedule::theory(1.0, 0.3), ModelParams(1.0));
  EXPECT_FALSE(r1.ok);
  EXPECT_DOUBLE_EQ(r1.lower, 1.0 / 32.0);
  EXPECT_DOUBLE_EQ(r1.upper, 0.25);
  EXPECT_FALSE(r1.violation.empty());
  EXPECT_FALSE(validate_mu0(Schedule::theory(1.0, 0.25), ModelParams(1.0)).ok);
  EXPECT_TRUE(validate_mu0(Schedule::theory(1.0, 1.0 / 32.0), ModelParams(1.0)).ok);
  EXPECT_FALSE(validate_mu0(Schedule::theory(1.0, 0.03), ModelParams(1.0)).ok);
}

TEST(ValidateMu0, PrintedFormulaForSmallA) {
  const auto r = validate_mu0(Schedule::theory(0.1, 0.00245), ModelParams(0.1));
  EXPECT_NEAR(r.lower, 0.01 / (4 * std::pow(1.01, 3)), 1e-15);
  EXPECT_NEAR(r.upper, 0.0025, 1e-15);
  EXPECT_TRUE(r.ok);
}

TEST(ValidateMu0, GdInterval) {
  const ModelParams m(1.0);
  const auto r = validate_mu0(Schedule::gd(1.0, 0.15, 0.05, 0.08), m);
  EXPECT_TRUE(r.ok);
  // Endpoints evaluated from the closed forms.
  EXPECT_NEAR(r.lower, 1.15 * 1.15 * 1.15 * 1.15 / (4 * 8 * 0.85 * 0.85), 1e-15);
  EXPECT_NEAR(r.upper, std::pow(0.95, 3) * std::pow(0.85, 4) / (4 * 1.15 * 1.15), 1e-15);
  EXPECT_NEAR(r.lower, 0.0757, 1e-4);
  EXPECT_NEAR(r.upper, 0.0846, 1e-4);
  EXPECT_FALSE(validate_mu0(Schedule::gd(1.0, 0.15, 0.05, 0.07), m).ok);
  EXPECT_FALSE(validate_mu0(Schedule::gd(1.0, 0.6, 0.05, 0.08), m).ok);
  EXPECT_FALSE(validate_mu0(Schedule::gd(1.0, 1.5, 0.05, 0.08), m).ok);
}

TEST(ValidateMu0, SurrogateMustStayBelowA) {
  EXPECT_TRUE(validate_mu0(Schedule::practical(), ModelParams(0.5)).ok);
  EXPECT_FALSE(validate_mu0(Schedule::practical(), ModelParams(0.4)).ok);
  EXPECT_TRUE(validate_mu0(Schedule::ahat(0.05), ModelParams(1.0)).ok);
  EXPECT_FALSE(validate_mu0(Schedule::ahat(0.05, 1.0), ModelParams(1.0)).ok);
}

TEST(NextMu, Examples) {
  EXPECT_NEAR(next_mu(Schedule::theory(2.0, 0.5), 0.5), 0.396850, 1e-6);
  EXPECT_NEAR(next_mu(Schedule::theory(2.0, 0.5), 0.5), std::pow(0.5, 4.0 / 3.0), 1e-16);
  const double mu1 = next_mu(Schedule::practical(), 1.0 / 27.0);
  EXPECT_NEAR(mu1, 0.034382139508242815, 1e-16);
  EXPECT_LT(mu1, 1.0 / 27.0);
  const auto gd = Schedule::gd(1.0, 0.15, 0.05, 0.08);
  EXPECT_NEAR(next_mu(gd, 0.01, 0.001), 0.0041939679564451721743, 1e-17);
  EXPECT_THROW(next_mu(gd, 0.01, 0.01), std::domain_error);
  EXPECT_THROW(next_mu(gd, 0.01), std::domain_error);
  EXPECT_THROW(next_mu(Schedule::theory(1, 0.1), 0.0), std::domain_error);
  EXPECT_DOUBLE_EQ(next_mu(Schedule::custom_factor(0.1, 4.0), 0.1), 0.025);
  EXPECT_DOUBLE_EQ(next_mu(Schedule::custom(0.1, [](double mu) { return mu * mu; }), 0.1), 0.01);
}

TEST(NextMu, AhatDefaultIsStrictAndMatchesPractical) {
  const auto s = Schedule::ahat(1.0 / 27.0);
  EXPECT_LT(next_mu(s, s.mu0), s.mu0);
  EXPECT_NEAR(next_mu(s, s.mu0), next_mu(Schedule::practical(), 1.0 / 27.0), 1e-17);
  EXPECT_NEAR(next_mu(Schedule::ahat(0.02, 0.0), 0.02), 0.02, 1e-17);
}

TEST(NextMu, TheoryStepLiesInAdmissibleInterval) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ua(0.2, 5.0), uf(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const ModelParams m(ua(rng));
    const auto [lo, hi] = theory_mu0_interval(m);
    const auto s = Schedule::theory(m.a(), lo + uf(rng) * (hi - lo));
    double mu = s.mu0;
    for (int k = 0; k < 12; ++k) {
      const double next = next_mu(s, mu);
      EXPECT_TRUE(step_in_theory_interval(mu, next, m)) << m.a() << ' ' << mu;
      EXPECT_LT(next, mu);
      mu = next;
    }
  }
  const ModelParams m(1.0);
  EXPECT_FALSE(step_in_theory_interval(0.1, 0.1, m));
  EXPECT_FALSE(step_in_theory_interval(0.1, 0.1 / 500, m));
}

TEST(NextMu, GdDecayMargin) {
  const ModelParams m(1.0);
  const auto s = Schedule::gd(1.0, 0.15, 0.05, 0.08);
  double mu = s.mu0;
  while (mu > 1e-12) {
    const auto prm = gd_stage_params(mu, m, s.beta);
    const double next = next_mu(s, mu, prm.eps);
    EXPECT_LE(next, (1 - s.delta) * mu);
    mu = next;
  }
}

TEST(GdStageParams, Examples) {
  const ModelParams m(1.0);
  const auto p = gd_stage_params(0.01, m, 0.1);
  EXPECT_NEAR(p.eps, 0.001, 1e-18);
  EXPECT_NEAR(gd_stage_params(0.05, m, 0.1).eta, 1.0 / 3.1, 1e-15);
  EXPECT_NEAR(gd_stage_params(0.05, m, 0.1).eta, 0.322581, 1e-6);
  const double mu = 0.5 * 0.2 * 0.2;
  EXPECT_DOUBLE_EQ(gd_stage_params(mu, m, 0.2).eps, std::pow(mu, 1.5));
  EXPECT_DOUBLE_EQ(gd_stage_params(0.5, m, 0.2).eps, 0.2 * 0.5);
  EXPECT_THROW(gd_stage_params(0.1, m, 0.0), std::domain_error);
}

TEST(OuterIterationBound, PinnedValueAndClamp) {
  EXPECT_EQ(outer_iteration_bound(0.08, 1.0, 0.05, 0.15, 1e-2), 179u);
  EXPECT_EQ(outer_iteration_bound(1e-3, 1.0, 0.05, 0.15, 1e3), 0u);
}

TEST(OuterIterationBound, Monotone) {
  std::size_t prev = outer_iteration_bound(0.08, 1.0, 0.05, 0.15, 1e-6);
  for (double e = 1e-6; e < 10; e *= 1.5) {
    const auto k = outer_iteration_bound(0.08, 1.0, 0.05, 0.15, e);
    EXPECT_LE(k, prev);
    prev = k;
  }
  prev = 0;
  for (double mu0 = 0.001; mu0 < 1; mu0 *= 1.3) {
    const auto k = outer_iteration_bound(mu0, 1.0, 0.05, 0.15, 1e-2);
    EXPECT_GE(k, prev);
    prev = k;
  }
}

TEST(DistanceToGlobal, Examples) {
  EXPECT_EQ(distance_to_global({1.5, 0}, ModelParams(1.5)), 0.0);
  EXPECT_DOUBLE_EQ(distance_to_global({0, 0}, ModelParams(2.0)), 2.0);
  EXPECT_NEAR(distance_to_global({0, 0.5}, ModelParams(1.0)), 1.118034, 1e-6);
}

TEST(RunHomotopyFlow, TheoryScheduleConverges) {
  const ModelParams m(1.0);
  StopRule stop;
  stop.mu_floor = 1e-10;
  const auto rep = run_homotopy_flow(Schedule::theory(1.0, 0.2), {0, 0},
                                     SecondMoment::population(m), m, stop);
  EXPECT_EQ(rep.stop_reason, StopReason::mu_floor);
  EXPECT_TRUE(rep.admissible);
  EXPECT_LE(rep.dist_to_global, 1e-3);
  EXPECT_DOUBLE_EQ(rep.dist_to_global, distance_to_global(rep.final, m));
  std::size_t total = 0;
  for (std::size_t k = 0; k < rep.stages.size(); ++k) {
    const auto& st = rep.stages[k];
    EXPECT_EQ(st.k, k);
    EXPECT_TRUE(st.converged);
    EXPECT_LE(st.grad_norm, 1e-10);
    EXPECT_LE(st.g_end, st.g_start + 1e-12);
    if (k > 0) {
      EXPECT_LT(st.mu, rep.stages[k - 1].mu);
      EXPECT_EQ(st.start, rep.stages[k - 1].end);
    }
    total += st.inner_steps;
  }
  EXPECT_EQ(total, rep.total_inner_steps);
  EXPECT_LT(next_mu(rep.schedule, rep.stages.back().mu), 1e-10);
}

TEST(RunHomotopyFlow, ProofChainAndWarmStartContainment) {
  for (double a : {0.5, 1.0, 2.0}) {
    const ModelParams m(a);
    const double tau = critical_tau(m).tau;
    const auto [lo, hi] = theory_mu0_interval(m);
    const auto sched = Schedule::theory(a, 0.5 * (lo + hi));
    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> u(-2 * a, 2 * a);
    const auto rep = run_homotopy_flow(sched, {u(rng), u(rng)}, SecondMoment::population(m), m);
    ASSERT_EQ(rep.stop_reason, StopReason::mu_floor);
    EXPECT_LE(rep.dist_to_global, 1e-3);
    for (std::size_t k = 0; k + 1 < rep.stages.size(); ++k) {
      const double mu_next = rep.stages[k + 1].mu;
      const Point& end = rep.stages[k].end;
      const auto set = solve_stationary_points(mu_next, m);
      if (set.size() == 3) {
        EXPECT_LT(end.y, std::sqrt(mu_next));
        EXPECT_LE(std::sqrt(mu_next), set.saddle().point.y);
        EXPECT_GT(end.x, set.saddle().point.x);
      }
      if (mu_next < tau) {
        const auto flags = region_membership(end, mu_next, m, 0.0);
        ASSERT_TRUE(flags.in_B_mu.has_value());
        EXPECT_TRUE(*flags.in_B_mu) << "a=" << a << " k=" << k;
      }
    }
    const std::size_t n = rep.stages.size();
    for (std::size_t k = n > 10 ? n - 10 : 1; k < n; ++k) {
      EXPECT_LE(distance_to_global(rep.stages[k].end, m),
                distance_to_global(rep.stages[k - 1].end, m) + 1e-12);
    }
  }
}

TEST(RunHomotopyFlow, PracticalScheduleConverges) {
  const ModelParams m(0.6);
  const auto rep = run_homotopy_flow(Schedule::practical(), {-1.0, 1.0},
                                     SecondMoment::population(m), m);
  EXPECT_TRUE(rep.admissible);
  EXPECT_LE(rep.dist_to_global, 1e-3);
}

TEST(RunHomotopyFlow, AhatScheduleConverges) {
  for (double a : {0.5, 1.0, 2.0}) {
    const ModelParams m(a);
    const auto [lo, hi] = theory_mu0_interval(m);
    const auto sched = Schedule::ahat(lo + 0.3 * (hi - lo), 0.05 * lo);
    ASSERT_TRUE(validate_mu0(sched, m).ok) << a;
    const auto rep = run_homotopy_flow(sched, {-a, 2 * a}, SecondMoment::population(m), m);
    EXPECT_LE(rep.dist_to_global, 1e-3) << a;
  }
}

TEST(RunHomotopyFlow, InadmissibleNeedsForce) {
  const ModelParams m(1.0);
  const auto pop = SecondMoment::population(m);
  EXPECT_THROW(run_homotopy_flow(Schedule::theory(1.0, 0.3), {0, 0}, pop, m),
               std::invalid_argument);
  EXPECT_THROW(run_homotopy_flow(Schedule::custom_factor(0.1, 500), {0, 0}, pop, m),
               std::invalid_argument);
  StopRule stop;
  stop.max_stages = 3;
  const auto rep = run_homotopy_flow(Schedule::custom_factor(0.1, 500), {0, 0}, pop, m, stop, {},
                                     true);
  EXPECT_FALSE(rep.admissible);
  EXPECT_FALSE(rep.violation.empty());
  EXPECT_EQ(rep.stop_reason, StopReason::stage_cap);
  EXPECT_EQ(rep.stages.size(), 3u);
}

TEST(RunHomotopyFlow, GentleCustomScheduleIsAdmissible) {
  const ModelParams m(1.0);
  const auto sched = Schedule::custom_factor(0.1, 1.5);
  StopRule stop;
  stop.mu_floor = 1e-8;
  const auto rep = run_homotopy_flow(sched, {0, 0}, SecondMoment::population(m), m, stop);
  EXPECT_TRUE(rep.admissible);
  EXPECT_LE(rep.dist_to_global, 1e-3);
}

TEST(RunHomotopyFlow, DistTolStopsEarly) {
  const ModelParams m(1.0);
  StopRule stop;
  stop.dist_tol = 0.05;
  const auto rep = run_homotopy_flow(Schedule::theory(1.0, 0.2), {0, 0},
                                     SecondMoment::population(m), m, stop);
  EXPECT_EQ(rep.stop_reason, StopReason::dist_reached);
  EXPECT_LE(rep.dist_to_global, 0.05);
  EXPECT_GT(rep.stages.back().mu, 1e-6);
}

TEST(RunHomotopyFlow, InvalidScheduleValueIsFailure) {
  const ModelParams m(1.0);
  const auto sched = Schedule::custom(0.1, [](double) { return std::nan(""); });
  const auto rep = run_homotopy_flow(sched, {0, 0}, SecondMoment::population(m), m, {}, {}, true);
  EXPECT_EQ(rep.stop_reason, StopReason::failure);
  EXPECT_EQ(rep.stages.size(), 1u);
}

TEST(RunHomotopyFlow, EmpiricalLossMeasuresToOracle) {
  const ModelParams m(1.0);
  const auto sm = moments_of(sample_sem(m, 10000, NoiseKind::gaussian, 42));
  const auto oracle = enumeration_oracle(sm);
  const auto rep = run_homotopy_flow(Schedule::ahat(1.0 / 27.0), {0, 0}, sm, m);
  EXPECT_EQ(rep.reference, oracle.winner);
  EXPECT_LE(rep.dist_to_global, 1e-3);
  EXPECT_NEAR(rep.final.x, 1.0, 0.1);
}

TEST(RunHomotopyGd, TheoremExample) {
  const double a = 1.0, beta = 0.15, delta = 0.05, mu0 = 0.08;
  StopRule stop;
  stop.dist_tol = 1e-2;
  const auto rep = run_homotopy_gd(a, beta, delta, mu0, {-1.0, 1.0}, stop, false, 1);
  const ModelParams m(a);
  ASSERT_EQ(rep.stop_reason, StopReason::dist_reached);
  EXPECT_LE(rep.dist_to_global, 1e-2);
  EXPECT_LE(rep.stages.size(), outer_iteration_bound(mu0, a, delta, beta, 1e-2));
  for (std::size_t k = 0; k < rep.stages.size(); ++k) {
    const auto& st = rep.stages[k];
    ASSERT_TRUE(st.eps && st.eta);
    EXPECT_TRUE(st.converged);
    EXPECT_LE(st.grad_norm, *st.eps);
    EXPECT_DOUBLE_EQ(*st.eta, 1.0 / smoothness_bound(st.mu, m));
    if (k > 0) {
      EXPECT_LE(st.mu, (1 - delta) * rep.stages[k - 1].mu);
    }
    EXPECT_TRUE(region_membership(st.end, st.mu, m, *st.eps).in_A_eps);
    const double L = 1.0 / *st.eta;
    EXPECT_LE(static_cast<double>(st.inner_steps),
              2 * L * (st.g_start - st.g_end) / (*st.eps * *st.eps) + 1);
  }
}

TEST(RunHomotopyGd, RejectsInadmissibleMu0) {
  EXPECT_THROW(run_homotopy_gd(1.0, 0.15, 0.05, 0.2, {0, 0}), std::invalid_argument);
  StopRule stop;
  stop.max_stages = 2;
  const auto rep = run_homotopy_gd(1.0, 0.15, 0.05, 0.2, {0, 0}, stop, true);
  EXPECT_FALSE(rep.admissible);
}

TEST(Schedule, KindNames) {
  for (auto k : {ScheduleKind::theory, ScheduleKind::practical, ScheduleKind::ahat,
                 ScheduleKind::gd, ScheduleKind::custom}) {
    EXPECT_EQ(parse_schedule_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_schedule_kind("fast"), std::invalid_argument);
}

TEST(RunHomotopyFlow, FastDecayFromSpuriousBasin) {
  const ModelParams m(0.5);
  const auto loss = SecondMoment::population(m);
  const double mu0 = 0.009283;
  ASSERT_LT(mu0, critical_tau(m).tau);
  const Point w0{-1.0, 0.25};
  const auto fast = run_homotopy_flow(Schedule::custom_factor(mu0, 500), w0, loss, m, {}, {}, true);
  EXPECT_FALSE(fast.admissible);
  EXPECT_LE(distance_to(fast.final, {0.0, 0.4}), 1e-2);
  // Below tau the stage-0 solve already commits to the spurious basin.
  const auto slow = run_homotopy_flow(Schedule::theory(0.5, mu0), w0, loss, m, {}, {}, true);
  EXPECT_LE(distance_to(slow.final, {0.0, 0.4}), 1e-2);
}
