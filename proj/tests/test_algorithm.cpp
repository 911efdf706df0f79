#include "regret_adjust/algorithm.hpp"
#include "regret_adjust/pump_model.hpp"
#include "oracles.hpp"
#include "properties.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace regret_adjust;
using testing_oracles::phi_by_active_sets;
using testing_oracles::random_instance;

namespace {

void expect_clean(const std::vector<std::string>& failures, const std::string& what) {
  for (const auto& f : failures) ADD_FAILURE() << what << ": " << f;
}

ProblemInstance with_box(const ProblemInstance& inst, Box box, std::optional<Vector> nominal) {
  return {inst.name(), inst.objective(), inst.general_constraints(), std::move(box),
          inst.x_box(), inst.mask(), inst.N(), std::move(nominal)};
}

ProblemInstance pinned_small() {
  auto base = builtin_instance("sec42-small");
  Vector u = *base.nominal();
  return with_box(base, Box(u, u), u);
}

}  // namespace

TEST(SolveMinMaxRegret, DegenerateBoxConvergesWithZeroRegret) {
  auto inst = pinned_small();
  auto rep = solve_min_max_regret(inst);
  ASSERT_EQ(rep.status, SolveStatus::Converged) << rep.message;
  EXPECT_EQ(rep.outer_iterations(), 1u);
  EXPECT_NEAR(rep.upperBound, 0.0, tol::opt * std::abs(lower_level(inst, *inst.nominal()).phi));
  double phi = lower_level(inst, *inst.nominal()).phi;
  EXPECT_NEAR(regret(rep.rule, inst, *inst.nominal(), phi), 0.0, 1e-6);
}

TEST(SolveAdjustableWorstCase, DegenerateBoxEqualsLowerLevelValue) {
  auto inst = pinned_small();
  auto rep = solve_adjustable_worst_case(inst);
  ASSERT_EQ(rep.status, SolveStatus::Converged) << rep.message;
  double phi = phi_by_active_sets(inst, *inst.nominal());
  EXPECT_NEAR(rep.upperBound, phi, tol::opt * std::abs(phi));
  EXPECT_NEAR(rep.lowerBound, phi, tol::opt * std::abs(phi));
}

TEST(SolveMinMaxRegret, SmallPumpInstanceBracketsPublishedRegret) {
  auto inst = builtin_instance("sec42-small");
  AlgoConfig cfg;
  cfg.epsilon = 1e-5;
  auto rep = solve_min_max_regret(inst, cfg);
  ASSERT_EQ(rep.status, SolveStatus::Converged) << rep.message;
  EXPECT_NEAR(rep.lowerBound, 227.2854, 0.01 * 227.2854);
  EXPECT_NEAR(rep.upperBound, 227.2854, 0.01 * 227.2854);
  EXPECT_LT(rep.upperBound - rep.lowerBound, cfg.epsilon * (1.0 + rep.lowerBound));
  expect_clean(testing_properties::check_history(inst, rep, cfg), "history");
  expect_clean(testing_properties::check_certificate(inst, rep, cfg), "certificate");
  for (const auto& rec : rep.history)
    if (rec.k > 0) EXPECT_EQ(rec.addedBy == AddedBy::Initial, false);
}

TEST(SolveMinMaxRegret, LargePumpInstanceMatchesPublishedRegret) {
  auto inst = builtin_instance("sec42-large");
  AlgoConfig cfg;
  cfg.epsilon = 1e-6;
  auto rep = solve_min_max_regret(inst, cfg);
  ASSERT_EQ(rep.status, SolveStatus::Converged) << rep.message;
  EXPECT_NEAR(rep.upperBound, 496.0199, 0.01 * 496.0199);
  expect_clean(testing_properties::check_history(inst, rep, cfg), "history");
}

TEST(SolveAdjustableWorstCase, PumpInstancesMatchPublishedWorstCase) {
  for (auto [name, expected] : {std::pair{"sec42-small", 616.962}, std::pair{"sec42-large", 3708.5053}}) {
    auto inst = builtin_instance(name);
    AlgoConfig cfg;
    cfg.epsilon = published_epsilon(name);
    auto rep = solve_adjustable_worst_case(inst, cfg);
    ASSERT_EQ(rep.status, SolveStatus::Converged) << name << ": " << rep.message;
    EXPECT_NEAR(rep.upperBound, expected, 0.01 * expected) << name;
    expect_clean(testing_properties::check_history(inst, rep, cfg), name);
    expect_clean(testing_properties::check_certificate(inst, rep, cfg), name);
  }
}

TEST(SolveAdaptive, RandomInstancesSatisfyLoopInvariants) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    auto inst = random_instance(rng, 1 + trial % 4, 1 + trial % 3, 2 + trial % 3, true);
    AlgoConfig cfg;
    cfg.epsilon = 1e-5;
    cfg.initialDiscretization = DefaultInitial{static_cast<std::uint64_t>(trial)};
    for (auto mode : {SolveMode::Regret, SolveMode::WorstCase}) {
      auto rep = solve_adaptive(inst, cfg, mode);
      std::string tag = "trial " + std::to_string(trial) + " " + to_string(mode);
      ASSERT_EQ(rep.status, SolveStatus::Converged) << tag << ": " << rep.message;
      expect_clean(testing_properties::check_history(inst, rep, cfg), tag);
      expect_clean(testing_properties::check_certificate(inst, rep, cfg), tag);
    }
  }
}

TEST(SolveMinMaxRegret, StageValuesAreProvenBoundsNotIncumbents) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> nx(1, 4), nu(1, 3), rows(1, 4);
  for (int t = 0; t < 40; ++t) {
    auto inst = random_instance(rng, nx(rng), nu(rng), rows(rng), t % 5 == 0);
    auto rep = solve_min_max_regret(inst);
    if (rep.status == SolveStatus::InstanceInfeasible) continue;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : rep.history) {
      if (!h.maxRegretUpper) continue;
      EXPECT_GE(*h.maxRegretUpper, h.rK - testing_properties::bound_slack(h.rK)) << "trial " << t << " k=" << h.k;
      best = std::min(best, *h.maxRegretUpper);
    }
    EXPECT_EQ(rep.upperBound, best) << "trial " << t;
  }
}

TEST(SolveAdaptive, RegretRuleIsNoBetterInWorstCaseThanAdjustableRule) {
  std::mt19937_64 rng(77);
  std::vector<ProblemInstance> insts{builtin_instance("sec42-small")};
  for (int i = 0; i < 6; ++i) insts.push_back(random_instance(rng, 2 + i % 3, 1 + i % 3, 3));
  for (const auto& inst : insts) {
    AlgoConfig cfg;
    cfg.epsilon = 1e-6;
    auto reg = solve_min_max_regret(inst, cfg);
    auto adj = solve_adjustable_worst_case(inst, cfg);
    ASSERT_EQ(reg.status, SolveStatus::Converged);
    ASSERT_EQ(adj.status, SolveStatus::Converged);
    // The adjustable rule is optimal for this criterion up to its own epsilon.
    double slack = adj.effectiveEpsilon + tol::opt * std::max(1.0, std::abs(adj.upperBound));
    EXPECT_GE(max_cost(inst, reg.rule).cost, max_cost(inst, adj.rule).cost - slack) << inst.name();
  }
}

TEST(SolveAdaptive, ConsecutiveInfeasibilityAdditionsBoundedByVertexCount) {
  // A rule fitted to one scenario is typically infeasible at many vertices.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    auto inst = random_instance(rng, 3, 3, 4);
    AlgoConfig cfg;
    cfg.initialDiscretization = GivenScenarios{{inst.u_box().lower()}};
    auto rep = solve_min_max_regret(inst, cfg);
    std::size_t run = 0, longest = 0;
    for (const auto& rec : rep.history) {
      run = rec.addedBy == AddedBy::Infeasibility ? run + 1 : 0;
      longest = std::max(longest, run);
      if (rec.addedBy == AddedBy::Infeasibility) EXPECT_TRUE(inst.u_box().is_vertex(*rec.addedScenario));
    }
    EXPECT_LE(longest, inst.u_box().vertex_count());
  }
}

TEST(SolveAdaptive, FullVertexInitialisationNeedsNoFeasibilityCuts) {
  auto inst = builtin_instance("sec42-small");
  AlgoConfig cfg;
  cfg.initialDiscretization = RandomExtremalFraction{1.0, 3};
  auto rep = solve_min_max_regret(inst, cfg);
  ASSERT_EQ(rep.status, SolveStatus::Converged) << rep.message;
  EXPECT_EQ(rep.additions(AddedBy::Infeasibility), 0u);
  EXPECT_EQ(rep.additions(AddedBy::Initial), 8u);
  EXPECT_EQ(rep.seed, std::optional<std::uint64_t>(3));
}

TEST(SolveAdaptive, SeededRunsAddTheSameScenarios) {
  auto inst = builtin_instance("sec42-large");
  AlgoConfig cfg;
  cfg.epsilon = 1e-6;
  cfg.initialDiscretization = RandomExtremalFraction{0.1, 11};
  auto a = solve_min_max_regret(inst, cfg);
  auto b = solve_min_max_regret(inst, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].addedBy, b.history[i].addedBy);
    ASSERT_EQ(a.history[i].addedScenario.has_value(), b.history[i].addedScenario.has_value());
    if (a.history[i].addedScenario) EXPECT_EQ(*a.history[i].addedScenario, *b.history[i].addedScenario);
    EXPECT_EQ(a.history[i].rK, b.history[i].rK);
  }
}

TEST(SolveAdaptive, IterationBudgetReturnsBestRuleSoFar) {
  auto inst = builtin_instance("sec42-large");
  AlgoConfig cfg;
  cfg.epsilon = 1e-6;
  cfg.maxOuterIterations = 2;
  auto rep = solve_min_max_regret(inst, cfg);
  EXPECT_EQ(rep.status, SolveStatus::IterationBudget);
  EXPECT_FALSE(rep.message.empty());
  EXPECT_EQ(rep.outer_iterations(), 2u);
  EXPECT_TRUE(rep.rule.respects(inst.mask()));
}

TEST(SolveAdaptive, InfeasibleScenarioReportsInstanceInfeasible) {
  auto p = sec42_small_params();
  p.uMax[0] = 1e5;  // more demand than the pumps and the tank can cover
  AlgoConfig cfg;
  cfg.initialDiscretization = RandomExtremalFraction{1.0, 1};
  auto rep = solve_min_max_regret(build_instance(p), cfg);
  EXPECT_EQ(rep.status, SolveStatus::InstanceInfeasible);
  EXPECT_FALSE(rep.message.empty());
}

TEST(AlgoConfig, RejectsInvalidSettings) {
  auto inst = builtin_instance("sec42-small");
  AlgoConfig cfg;
  cfg.epsilon = 0;
  EXPECT_THROW(solve_min_max_regret(inst, cfg), InvariantError);
  cfg = {};
  cfg.initialDiscretization = RandomExtremalFraction{1.5, 1};
  EXPECT_THROW(solve_min_max_regret(inst, cfg), InvariantError);
  cfg.initialDiscretization = GivenScenarios{};
  EXPECT_THROW(solve_min_max_regret(inst, cfg), std::invalid_argument);
  cfg.initialDiscretization = GivenScenarios{{Vector::Constant(3, 1e6)}};
  EXPECT_THROW(solve_min_max_regret(inst, cfg), InvariantError);
  cfg.initialDiscretization = NominalOnly{};
  EXPECT_THROW(solve_min_max_regret(builtin_instance("sec41"), cfg), std::invalid_argument);
}

TEST(EvaluateRule, RegretNonnegativeOnFeasibleScenarios) {
  std::mt19937_64 rng(9);
  for (const char* name : {"sec42-small", "sec42-large"}) {
    auto inst = builtin_instance(name);
    auto rep = solve_min_max_regret(inst);
    ASSERT_EQ(rep.status, SolveStatus::Converged);
    auto all = inst.u_box().vertices();
    std::vector<Vector> us(all.begin(), all.begin() + std::min<std::size_t>(all.size(), 16));
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int i = 0; i < 30; ++i) {
      Vector u(inst.n_u());
      for (Eigen::Index k = 0; k < u.size(); ++k)
        u[k] = inst.u_box().lower()[k] + d(rng) * inst.u_box().width()[k];
      us.push_back(u);
    }
    for (const auto& ev : evaluate_rule(inst, rep.rule, us)) {
      EXPECT_GE(ev.regret, -1e-7) << name;
      EXPECT_LE(ev.violation, 1e-6) << name;
      EXPECT_NEAR(ev.cost, evaluate_objective(rep.rule, inst, ev.u), 1e-12 * std::abs(ev.cost));
    }
  }
}

TEST(EvaluateRule, NominalCostNeedsNominalScenario) {
  auto inst = builtin_instance("sec41");
  DecisionRule rule(Vector::Zero(inst.n_x()), Matrix::Zero(inst.n_x(), inst.n_u()), inst.N());
  EXPECT_THROW(nominal_cost(inst, rule), std::invalid_argument);
  EXPECT_THROW(evaluate_rule(inst, rule, {Vector::Zero(inst.n_u())}), InvariantError);
}
