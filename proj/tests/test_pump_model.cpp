#include "regret_adjust/pump_model.hpp"
#include "regret_adjust/subproblems.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace regret_adjust;

TEST(PumpModel, SmallInstanceDimensionsAndFreeParameters) {
  auto inst = builtin_instance("sec42-small");
  EXPECT_EQ(inst.n_x(), 6);
  EXPECT_EQ(inst.n_u(), 3);
  EXPECT_EQ(inst.n_x() * (inst.n_u() + 1), 24);
  EXPECT_EQ(inst.free_parameter_count(), 12u);
}

TEST(PumpModel, TwelvePeriodInstanceHas156FreeParameters) {
  EXPECT_EQ(builtin_instance("sec41").free_parameter_count(), 156u);
}

TEST(PumpModel, PublishedParameterSpotChecks) {
  auto small = sec42_small_params();
  EXPECT_EQ(small.e, (std::vector<double>{1, 1.2, 0.8}));
  EXPECT_DOUBLE_EQ(sec41_params().uMax[7], 2496.93);
  auto large = builtin_instance("sec42-large");
  // Period 3 (index 2) with lag 2 sees only the first demand.
  EXPECT_TRUE(large.mask().allows(2, 0));
  EXPECT_FALSE(large.mask().allows(2, 1));
  EXPECT_FALSE(large.mask().allows(1, 0));
  EXPECT_EQ(builtin_instances().size(), 3u);
  EXPECT_FALSE(builtin_instance("sec41").nominal().has_value());
  EXPECT_TRUE(builtin_instance("sec42-large").nominal().has_value());
}

TEST(PumpModel, HessianIsDiagonalPositive) {
  for (const auto& [name, inst] : builtin_instances()) {
    const auto& H = inst.objective().H;
    EXPECT_TRUE(inst.objective().is_diagonal()) << name;
    EXPECT_GT(H.diagonal().minCoeff(), 0.0) << name;
  }
}

TEST(PumpModel, MaskIsCausal) {
  for (const auto& p : builtin_params()) {
    auto inst = build_instance(p);
    for (int q = 0; q < p.P; ++q)
      for (int t = 0; t < p.T; ++t)
        for (int r = 0; r < p.T; ++r)
          EXPECT_EQ(inst.mask().allows(q * p.T + t, r), r <= t - p.kappa);
  }
}

TEST(PumpModel, AssembledRowsAgreeWithLevelSimulation) {
  for (const auto& p : builtin_params()) {
    auto inst = build_instance(p);
    const auto& cs = inst.constraints();
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    int agree_feasible = 0;
    for (int trial = 0; trial < 2000; ++trial) {
      Vector u(p.T), x(p.P * p.T);
      for (int t = 0; t < p.T; ++t) u[t] = p.uMin[t] + d(rng) * (p.uMax[t] - p.uMin[t]);
      for (int q = 0; q < p.P; ++q)
        for (int t = 0; t < p.T; ++t) {
          // Pump roughly the demand share so both verdicts occur.
          x[q * p.T + t] = std::min(p.Q[q], u[t] / p.P * (0.85 + 0.3 * d(rng)));
        }
      bool sim_ok = true;
      double h = p.h0;
      for (int t = 0; t < p.T; ++t) {
        double inflow = 0;
        for (int q = 0; q < p.P; ++q) inflow += x[q * p.T + t];
        h += (inflow - u[t]) / p.areaA;
        sim_ok = sim_ok && h >= p.hMin && h <= p.hMax;
      }
      sim_ok = sim_ok && h >= p.hMinT;
      for (int i = 0; i < x.size(); ++i) sim_ok = sim_ok && x[i] >= 0;
      bool rows_ok = (cs.A * x - cs.rhs(u)).maxCoeff() <= 1e-12;
      // Exact agreement up to rounding at the boundary.
      double margin = (cs.A * x - cs.rhs(u)).cwiseAbs().minCoeff();
      if (margin > 1e-9) EXPECT_EQ(sim_ok, rows_ok) << p.name << " trial " << trial;
      agree_feasible += rows_ok;
    }
    EXPECT_GT(agree_feasible, 0) << p.name;
  }
}

TEST(PumpModel, ZeroDemandOptimumIsPerVariableMinimizer) {
  auto p = sec42_small_params();
  p.uMin = p.uMax = {0, 0, 0};
  p.uNominal.reset();
  p.hMax = 100;
  auto inst = build_instance(p);
  auto ll = lower_level(inst, Vector::Zero(3));
  double expected = 0.0;
  for (int q = 0; q < p.P; ++q)
    for (int t = 0; t < p.T; ++t) {
      double x = std::clamp(-p.c1[q] / (2 * p.c2[q]), 0.0, p.Q[q]);
      expected += p.e[t] * (p.c2[q] * x * x + p.c1[q] * x + p.c0[q]);
      EXPECT_NEAR(ll.xStar[q * p.T + t], x, 1e-5 * x);
    }
  EXPECT_NEAR(ll.phi, expected, 1e-7 * std::abs(expected));
}

TEST(PumpModel, RejectsInconsistentParameters) {
  auto p = sec42_small_params();
  p.e.pop_back();
  EXPECT_THROW(build_instance(p), InvariantError);
  p = sec42_small_params();
  p.uMin[0] = 2000;
  try {
    build_instance(p);
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_EQ(e.field(), "uBox");
  }
  p = sec42_small_params();
  p.c2[1] = 0;
  EXPECT_THROW(build_instance(p), InvariantError);
}
