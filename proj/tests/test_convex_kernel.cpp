#include "regret_adjust/convex_kernel.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace regret_adjust;

namespace {

Matrix random_psd(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Matrix M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = d(rng);
  Matrix H = scale * (M * M.transpose());
  H.diagonal().array() += 0.05 * scale;
  return H;
}

Vector random_vec(std::mt19937_64& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

}  // namespace

TEST(SolveQp, BoundActiveAtOne) {
  QpProblem p{Matrix::Constant(1, 1, 2.0), Vector::Zero(1), Matrix::Constant(1, 1, -1.0),
              Vector::Constant(1, -1.0)};
  auto s = solve_qp(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.z[0], 1.0, 1e-8);
  EXPECT_NEAR(s.value, 1.0, 1e-8);
  EXPECT_LE(s.kktResidual, 1e-8);
}

TEST(SolveQp, Unconstrained) {
  QpProblem p{Matrix::Constant(1, 1, 2.0), Vector::Zero(1), Matrix(0, 1), Vector(0)};
  auto s = solve_qp(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.z[0], 0.0, 1e-9);
  EXPECT_NEAR(s.value, 0.0, 1e-9);
}

TEST(SolveQp, DetectsInfeasibility) {
  Matrix G(2, 1);
  G << 1.0, -1.0;
  QpProblem p{Matrix::Constant(1, 1, 1.0), Vector::Zero(1), G, Vector((Vector(2) << 0.0, -1.0).finished())};
  EXPECT_EQ(solve_qp(p).status, KernelStatus::Infeasible);
}

TEST(SolveQp, DetectsUnboundedness) {
  Matrix G(1, 2);
  G << 1.0, 0.0;
  QpProblem p{Matrix::Zero(2, 2), Vector((Vector(2) << 0.0, -1.0).finished()), G, Vector::Ones(1)};
  EXPECT_EQ(solve_qp(p).status, KernelStatus::Unbounded);
}

TEST(SolveQp, MatchesActiveSetEnumerationOnRandomInstances) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3, k = 7;
    Matrix H = random_psd(rng, n);
    Vector c = random_vec(rng, n, -3, 3);
    Matrix G(k, n);
    for (int i = 0; i < k; ++i) G.row(i) = random_vec(rng, n).transpose();
    // Feasible by construction around a random interior point.
    Vector z0 = random_vec(rng, n);
    Vector h = G * z0 + random_vec(rng, k, 0.1, 1.0);
    QpProblem p{H, c, G, h};
    auto s = solve_qp(p);
    ASSERT_TRUE(s.optimal()) << "trial " << trial;
    EXPECT_LE(s.kktResidual, 1e-8);
    double oracle = testing_oracles::qp_by_active_sets(H, c, G, h);
    EXPECT_NEAR(s.value, oracle, 1e-8 * (1.0 + std::abs(oracle))) << "trial " << trial;
  }
}

TEST(SolveMinimax, TwoSymmetricParabolas) {
  MinimaxProblem p;
  p.add(QuadraticObjective(Matrix::Constant(1, 1, 2.0), Vector::Zero(1), 0.0));
  p.add(QuadraticObjective(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, -4.0), 4.0));
  p.G = Matrix(0, 1);
  p.h = Vector(0);
  auto s = solve_minimax(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.z[0], 1.0, 1e-7);
  EXPECT_NEAR(s.value, 1.0, 1e-7);
}

TEST(SolveMinimax, SinglePieceReducesToQp) {
  std::mt19937_64 rng(11);
  Matrix H = random_psd(rng, 3);
  Vector c = random_vec(rng, 3);
  Matrix G = Matrix::Identity(3, 3);
  Vector h = Vector::Constant(3, -0.2);
  MinimaxProblem mm;
  mm.add(QuadraticObjective(H, c, 0.5));
  mm.G = G;
  mm.h = h;
  auto a = solve_minimax(mm);
  auto b = solve_qp({H, c, G, h});
  ASSERT_TRUE(a.optimal());
  ASSERT_TRUE(b.optimal());
  EXPECT_NEAR(a.value, b.value + 0.5, 1e-8);
  EXPECT_LE((a.z - b.z).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(SolveMinimax, MatchesGridSearchInTwoDimensions) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    MinimaxProblem p;
    std::vector<QuadraticObjective> pieces;
    for (int s = 0; s < 3; ++s) {
      pieces.emplace_back(random_psd(rng, 2, 0.1), random_vec(rng, 2, -0.2, 0.2),
                          random_vec(rng, 1, -0.1, 0.1)[0]);
      p.add(pieces.back());
    }
    // Feasible region: the unit box intersected with one random half-plane.
    Matrix G(5, 2);
    G << 1, 0, -1, 0, 0, 1, 0, -1, 0.6, 0.8;
    Vector h(5);
    h << 1, 1, 1, 1, 0.5;
    p.G = G;
    p.h = h;
    auto s = solve_minimax(p);
    ASSERT_TRUE(s.optimal());
    double grid = testing_oracles::minimax_grid(pieces, G, h, -1.0, 1.0, 1e-3);
    EXPECT_LE(s.value, grid + 1e-9);
    EXPECT_NEAR(s.value, grid, 1e-4) << "trial " << trial;
  }
}

TEST(SolveMinimax, EpigraphQpEquivalenceForSharedHessian) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3, pieces = 4;
    Matrix H = random_psd(rng, n);
    MinimaxProblem mm;
    // Epigraph QP in (z, t): min 1/2 z'Hz + t  s.t.  c_s'z + d_s - t <= 0, box rows.
    Matrix He = Matrix::Zero(n + 1, n + 1);
    He.topLeftCorner(n, n) = H;
    Vector ce = Vector::Zero(n + 1);
    ce[n] = 1.0;
    Matrix Ge = Matrix::Zero(pieces + 2 * n, n + 1);
    Vector he = Vector::Zero(pieces + 2 * n);
    for (int s = 0; s < pieces; ++s) {
      Vector c = random_vec(rng, n, -2, 2);
      double d = random_vec(rng, 1)[0];
      mm.add(QuadraticObjective(H, c, d));
      Ge.row(s).head(n) = c.transpose();
      Ge(s, n) = -1.0;
      he[s] = -d;
    }
    mm.G = Matrix::Zero(2 * n, n);
    mm.h = Vector::Constant(2 * n, 1.5);
    for (int i = 0; i < n; ++i) {
      mm.G(2 * i, i) = 1.0;
      mm.G(2 * i + 1, i) = -1.0;
      Ge(pieces + 2 * i, i) = 1.0;
      Ge(pieces + 2 * i + 1, i) = -1.0;
      he[pieces + 2 * i] = he[pieces + 2 * i + 1] = 1.5;
    }
    auto a = solve_minimax(mm);
    auto b = solve_qp({He, ce, Ge, he});
    ASSERT_TRUE(a.optimal());
    ASSERT_TRUE(b.optimal());
    EXPECT_NEAR(a.value, b.value, tol::opt * (1.0 + std::abs(b.value)));
  }
}

TEST(SolveMinimax, AddingPieceNeverDecreasesValue) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    MinimaxProblem p;
    p.G = Matrix(0, 2);
    p.h = Vector(0);
    double previous = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < 5; ++s) {
      p.add(QuadraticObjective(random_psd(rng, 2), random_vec(rng, 2, -2, 2), random_vec(rng, 1)[0]));
      auto sol = solve_minimax(p);
      ASSERT_TRUE(sol.optimal());
      EXPECT_GE(sol.value, previous - tol::opt * (1.0 + std::abs(previous)));
      previous = sol.value;
    }
  }
}

TEST(SolveMinimax, RejectsEmptyPieceList) {
  MinimaxProblem p;
  EXPECT_THROW(solve_minimax(p), std::invalid_argument);
}

TEST(SolveLp, MaximizeOverUnitInterval) {
  Matrix G(2, 1);
  G << 1, -1;
  auto s = solve_lp(Vector::Constant(1, -1.0), G, Vector((Vector(2) << 1, 0).finished()));
  ASSERT_TRUE(s.optimal());
  EXPECT_DOUBLE_EQ(s.z[0], 1.0);
  EXPECT_DOUBLE_EQ(-s.value, 1.0);
}

TEST(SolveLp, MaximizeSumOverUnitBox) {
  Matrix G(4, 2);
  G << 1, 0, -1, 0, 0, 1, 0, -1;
  Vector h(4);
  h << 1, 0, 1, 0;
  auto s = solve_lp(Vector::Constant(2, -1.0), G, h);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.z[0], 1.0, 1e-12);
  EXPECT_NEAR(s.z[1], 1.0, 1e-12);
  EXPECT_NEAR(-s.value, 2.0, 1e-12);
}

TEST(SolveLp, RandomBoxLpMatchesSignRule) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4;
    Vector c = random_vec(rng, n, -1, 1);
    Vector lo = random_vec(rng, n, -5, 0), hi = random_vec(rng, n, 0.5, 5);
    Matrix G = Matrix::Zero(2 * n, n);
    Vector h(2 * n);
    for (int i = 0; i < n; ++i) {
      G(2 * i, i) = 1;
      h[2 * i] = hi[i];
      G(2 * i + 1, i) = -1;
      h[2 * i + 1] = -lo[i];
    }
    auto s = solve_lp(c, G, h);
    ASSERT_TRUE(s.optimal());
    double oracle = 0.0;
    for (int i = 0; i < n; ++i) oracle += c[i] * (c[i] > 0 ? lo[i] : hi[i]);
    EXPECT_NEAR(s.value, oracle, 1e-10);
  }
}

TEST(SolveLp, InfeasibleAndUnbounded) {
  Matrix G(2, 1);
  G << 1, -1;
  EXPECT_EQ(solve_lp(Vector::Ones(1), G, Vector((Vector(2) << 0, -1).finished())).status,
            KernelStatus::Infeasible);
  Matrix G1(1, 1);
  G1 << 1;
  EXPECT_EQ(solve_lp(Vector::Constant(1, 1.0), G1, Vector::Ones(1)).status, KernelStatus::Unbounded);
}
