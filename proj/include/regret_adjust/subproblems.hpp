#pragma once

// The oracles of the adaptive discretization loop:
//   lower_level                 perfect-information problem at one scenario
//   solve_discretized_master    min-max regret (or min-max cost) over a finite scenario set
//   max_infeasibility           worst constraint violation over the box (closed form)
//   max_regret_global           global max regret over the box (branch and bound)
//   max_cost                    worst-case cost over the box (vertex enumeration)

#include "regret_adjust/convex_kernel.hpp"
#include "regret_adjust/core.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <functional>
#include <queue>
#include <string>
#include <unordered_map>

namespace regret_adjust {

// ---------------------------------------------------------------------------
// Lower level
// ---------------------------------------------------------------------------

struct LowerLevelResult {
  double phi = 0.0;
  Vector xStar;
  Vector multipliers;  // one per folded constraint row
  /// Subgradient of phi at u: phi(v) >= phi + phiGradient'(v - u) for all v.
  Vector phiGradient;
};

/// min f(x) s.t. A x <= b0 + B u. Throws InfeasibleInstanceError when F(u) is empty.
inline LowerLevelResult lower_level(const ProblemInstance& instance, const Vector& u,
                                    const KernelOptions& options = {}) {
  instance.check_scenario(u);
  const auto& f = instance.objective();
  const auto& cs = instance.constraints();
  QpProblem qp{f.H, f.c, cs.A, cs.rhs(u)};
  auto sol = solve_qp(qp, options, instance.x_box().clamp(Vector::Zero(instance.n_x())));
  if (sol.status == KernelStatus::Infeasible)
    throw InfeasibleInstanceError("perfect-information problem is infeasible at a scenario", u);
  if (!sol.optimal())
    throw std::runtime_error("lower level: " + std::string(to_string(sol.status)) +
                             " (kkt " + std::to_string(sol.kktResidual) + ")");
  LowerLevelResult out;
  out.xStar = sol.z;
  out.phi = f.value(sol.z);
  out.multipliers = sol.multipliers.cwiseMax(0.0);
  out.phiGradient = -cs.B.transpose() * out.multipliers;
  return out;
}

inline ScenarioEntry make_entry(const ProblemInstance& instance, const Vector& u,
                                const KernelOptions& options = {}) {
  auto ll = lower_level(instance, u, options);
  return {u, ll.phi, ll.xStar};
}

// ---------------------------------------------------------------------------
// Rule parametrization used by the master problem
// ---------------------------------------------------------------------------

/// Free rule entries in centered, width-normalized coordinates:
///   x_i(u) = theta_i0 + sum_k theta_ik * (u_k - center_k) / halfwidth_k
/// over mask-allowed, nondegenerate coordinates k. |Pi_ik| <= N becomes
/// |theta_ik| <= N * halfwidth_k.
class RuleParametrization {
 public:
  struct Entry {
    Eigen::Index decision;
    Eigen::Index coord;  // -1 for the intercept
  };

  explicit RuleParametrization(const ProblemInstance& instance)
      : n_x_(instance.n_x()), n_u_(instance.n_u()), N_(instance.N()),
        center_(instance.u_box().center()), half_(0.5 * instance.u_box().width()) {
    for (Eigen::Index i = 0; i < n_x_; ++i) {
      entries_.push_back({i, -1});
      for (Eigen::Index k = 0; k < n_u_; ++k)
        if (instance.mask().allows(i, k) && half_[k] > 0) entries_.push_back({i, k});
    }
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(entries_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }

  /// x(u) = realization(u) * theta.
  Matrix realization(const Vector& u) const {
    Matrix M = Matrix::Zero(n_x_, size());
    for (Eigen::Index j = 0; j < size(); ++j) {
      const auto& e = entries_[static_cast<std::size_t>(j)];
      M(e.decision, j) = e.coord < 0 ? 1.0 : (u[e.coord] - center_[e.coord]) / half_[e.coord];
    }
    return M;
  }

  /// Upper bound on |theta_j| (infinite for intercepts).
  double bound(Eigen::Index j) const {
    const auto& e = entries_[static_cast<std::size_t>(j)];
    return e.coord < 0 ? std::numeric_limits<double>::infinity() : N_ * half_[e.coord];
  }

  DecisionRule to_rule(const Vector& theta) const {
    Vector pi0 = Vector::Zero(n_x_);
    Matrix Pi = Matrix::Zero(n_x_, n_u_);
    for (Eigen::Index j = 0; j < size(); ++j) {
      const auto& e = entries_[static_cast<std::size_t>(j)];
      if (e.coord < 0) {
        pi0[e.decision] += theta[j];
      } else {
        double slope = theta[j] / half_[e.coord];
        slope = std::clamp(slope, -N_, N_);
        Pi(e.decision, e.coord) = slope;
        pi0[e.decision] -= slope * center_[e.coord];
      }
    }
    return {pi0, Pi, N_};
  }

  Vector from_rule(const DecisionRule& rule) const {
    Vector theta(size());
    for (Eigen::Index j = 0; j < size(); ++j) {
      const auto& e = entries_[static_cast<std::size_t>(j)];
      if (e.coord < 0) {
        theta[j] = rule.pi0[e.decision] + rule.Pi.row(e.decision).dot(center_);
      } else {
        theta[j] = rule.Pi(e.decision, e.coord) * half_[e.coord];
      }
    }
    return theta;
  }

 private:
  Eigen::Index n_x_, n_u_;
  double N_;
  Vector center_, half_;
  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Discretized master problem
// ---------------------------------------------------------------------------

enum class MasterObjective { Regret, WorstCase };

struct MasterResult {
  DecisionRule rule;
  double rK = 0.0;  // attained max over the discretization (regret or cost)
  KernelSolution solution;
  std::size_t linearRows = 0;
};

namespace detail {

struct RowKey {
  std::vector<double> data;
  bool operator==(const RowKey& o) const { return data == o.data; }
};
struct RowKeyHash {
  std::size_t operator()(const RowKey& k) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (double d : k.data) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      h ^= bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

}  // namespace detail

/// Builds the minimax program over theta for the given scenarios; rows
/// identical across scenarios (same coefficients and right-hand side) are
/// emitted once.
inline MinimaxProblem build_master_problem(const ProblemInstance& instance,
                                           const RuleParametrization& param,
                                           const Discretization& disc, MasterObjective objective) {
  const auto n = param.size();
  const auto& f = instance.objective();
  const auto& cs = instance.constraints();
  const QuadraticPiece base = QuadraticPiece::from_objective(f);

  MinimaxProblem mm;
  mm.pieces.reserve(disc.size());
  std::vector<Vector> rows;
  std::vector<double> rhs;
  std::unordered_map<detail::RowKey, std::size_t, detail::RowKeyHash> seen;

  for (const auto& e : disc.entries()) {
    Matrix M = param.realization(e.u);
    QuadraticPiece piece;
    piece.factor = base.factor * M;
    piece.linear = M.transpose() * f.c;
    piece.constant = f.d - (objective == MasterObjective::Regret ? e.phi : 0.0);
    mm.pieces.push_back(std::move(piece));

    Matrix AM = cs.A * M;
    Vector b = cs.rhs(e.u);
    for (Eigen::Index r = 0; r < AM.rows(); ++r) {
      detail::RowKey key;
      key.data.resize(static_cast<std::size_t>(n) + 1);
      for (Eigen::Index j = 0; j < n; ++j) key.data[static_cast<std::size_t>(j)] = AM(r, j);
      key.data[static_cast<std::size_t>(n)] = b[r];
      if (seen.emplace(std::move(key), rows.size()).second) {
        rows.emplace_back(AM.row(r).transpose());
        rhs.push_back(b[r]);
      }
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    double bd = param.bound(j);
    if (!std::isfinite(bd)) continue;
    Vector e = Vector::Zero(n);
    e[j] = 1.0;
    rows.push_back(e);
    rhs.push_back(bd);
    rows.push_back(-e);
    rhs.push_back(bd);
  }
  mm.G.resize(static_cast<Eigen::Index>(rows.size()), n);
  mm.h.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    mm.G.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    mm.h[static_cast<Eigen::Index>(r)] = rhs[r];
  }
  return mm;
}

/// min over rules of max_{u in disc} [f(x(u)) - phi(u)] (Regret) or
/// max_{u in disc} f(x(u)) (WorstCase), subject to feasibility at every u in
/// disc, |Pi| <= N and the adjustability mask.
inline MasterResult solve_discretized_master(const ProblemInstance& instance,
                                             const Discretization& disc,
                                             MasterObjective objective = MasterObjective::Regret,
                                             const KernelOptions& options = {},
                                             const DecisionRule* warm = nullptr) {
  if (disc.empty()) throw std::invalid_argument("master: discretization is empty");
  RuleParametrization param(instance);
  MinimaxProblem mm = build_master_problem(instance, param, disc, objective);
  if (warm) mm.start = param.from_rule(*warm);
  auto sol = solve_minimax(mm, options);
  if (sol.status == KernelStatus::Infeasible)
    throw InfeasibleInstanceError("discretized master problem is infeasible", disc.entries().back().u);
  if (!sol.usable())
    throw std::runtime_error("master: " + std::string(to_string(sol.status)) + " (kkt " +
                             std::to_string(sol.kktResidual) + ")");
  MasterResult out;
  out.rule = param.to_rule(sol.z);
  // Report the attained value of the returned rule.
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : disc.entries()) {
    double v = evaluate_objective(out.rule, instance, e.u) -
               (objective == MasterObjective::Regret ? e.phi : 0.0);
    best = std::max(best, v);
  }
  out.rK = best;
  out.linearRows = static_cast<std::size_t>(mm.G.rows());
  out.solution = std::move(sol);
  return out;
}

// ---------------------------------------------------------------------------
// Stage 2: maximal infeasibility
// ---------------------------------------------------------------------------

struct MaxInfeasibilityResult {
  Vector u;                  // a vertex of uBox
  double violation = 0.0;    // raw max_j (A x(u) - b(u))_j
  Eigen::Index row = -1;     // attaining row (lowest index on ties)
  double scaledViolation = 0.0;  // max_j over rows of (worst violation of row j) / row_scale_j
};

/// Each row's violation is affine in u, so its maximum over the box sits at
/// the vertex picking u_k = upper where the u_k-coefficient is positive.
inline MaxInfeasibilityResult max_infeasibility(const ProblemInstance& instance,
                                                const DecisionRule& rule) {
  instance.check_rule(rule);
  const auto& cs = instance.constraints();
  const auto& box = instance.u_box();
  Vector constant = cs.A * rule.pi0 - cs.b0;
  Matrix coef = cs.A * rule.Pi - cs.B;  // m x n_u
  MaxInfeasibilityResult out;
  out.violation = -std::numeric_limits<double>::infinity();
  out.scaledViolation = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < cs.rows(); ++j) {
    double v = constant[j];
    for (Eigen::Index k = 0; k < box.dim(); ++k)
      v += coef(j, k) * (coef(j, k) > 0 ? box.upper()[k] : box.lower()[k]);
    out.scaledViolation = std::max(out.scaledViolation, v / instance.row_scales()[j]);
    if (v > out.violation) {
      out.violation = v;
      out.row = j;
    }
  }
  out.u = box.lower();
  if (out.row >= 0)
    for (Eigen::Index k = 0; k < box.dim(); ++k)
      out.u[k] = coef(out.row, k) > 0 ? box.upper()[k] : box.lower()[k];
  return out;
}

/// Same problem solved as one LP per row over the box (cross-check path).
inline MaxInfeasibilityResult max_infeasibility_lp(const ProblemInstance& instance,
                                                   const DecisionRule& rule) {
  instance.check_rule(rule);
  const auto& cs = instance.constraints();
  const auto& box = instance.u_box();
  const auto d = box.dim();
  Matrix G = Matrix::Zero(2 * d, d);
  Vector h(2 * d);
  for (Eigen::Index k = 0; k < d; ++k) {
    G(2 * k, k) = 1.0;
    h[2 * k] = box.upper()[k];
    G(2 * k + 1, k) = -1.0;
    h[2 * k + 1] = -box.lower()[k];
  }
  Vector constant = cs.A * rule.pi0 - cs.b0;
  Matrix coef = cs.A * rule.Pi - cs.B;
  MaxInfeasibilityResult out;
  out.violation = -std::numeric_limits<double>::infinity();
  out.scaledViolation = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < cs.rows(); ++j) {
    auto lp = solve_lp(-coef.row(j).transpose(), G, h);
    if (!lp.optimal()) throw std::runtime_error("max_infeasibility_lp: LP failed");
    double v = constant[j] - lp.value;
    out.scaledViolation = std::max(out.scaledViolation, v / instance.row_scales()[j]);
    if (v > out.violation) {
      out.violation = v;
      out.row = j;
      out.u = lp.z;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Worst-case cost
// ---------------------------------------------------------------------------

struct MaxCostResult {
  Vector u;
  double cost = 0.0;
};

inline constexpr std::size_t kMaxVertexDims = 20;
inline constexpr std::size_t kMaxLocalDims = 12;

/// f(x(u)) is convex in u, so its maximum over the box is attained at a vertex.
inline MaxCostResult max_cost(const ProblemInstance& instance, const DecisionRule& rule) {
  instance.check_rule(rule);
  const auto& box = instance.u_box();
  if (box.nondegenerate_dims().size() > kMaxVertexDims)
    throw std::invalid_argument("max_cost: more than 20 uncertain dimensions");
  MaxCostResult out;
  out.cost = -std::numeric_limits<double>::infinity();
  const auto count = box.vertex_count();
  for (std::uint64_t k = 0; k < count; ++k) {
    Vector v = box.vertex(k);
    double c = evaluate_objective(rule, instance, v);
    if (c > out.cost) {
      out.cost = c;
      out.u = v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage 3: global maximal regret by branch and bound
// ---------------------------------------------------------------------------

struct BnbOptions {
  double epsBnb = 1e-6;             // absolute gap
  std::size_t maxNodes = 100000;
  /// Sub-box vertices probed per node (the ones maximizing the current bound).
  int vertexProbes = 1;
  /// At the root every vertex is probed when there are at most this many.
  std::uint64_t rootVertexProbeLimit = 64;
  std::size_t maxCuts = 12;
  /// Exact local models of the perfect-information value kept per node.
  std::size_t maxRegions = 6;
  /// Stop as soon as the global upper bound is certified below this value.
  std::optional<double> stopBelow;
  KernelOptions kernel{};
};

struct BnbNode {
  Box subBox;
  double upperBound = std::numeric_limits<double>::infinity();
  std::optional<std::pair<Vector, double>> bestPoint;  // (u, regret) probed inside subBox
};

/// Called once per processed node after its bound is final.
using BnbObserver = std::function<void(const BnbNode&)>;

struct MaxRegretResult {
  Vector u;
  double regretValue = -std::numeric_limits<double>::infinity();
  double upperBound = std::numeric_limits<double>::infinity();
  std::size_t nodesExplored = 0;
  std::size_t lowerLevelSolves = 0;
  bool converged = false;
  double phi = 0.0;
  Vector xStar;
};

namespace detail {

// f(x(u)) = 1/2 u'Qu + l'u + k for a fixed rule.
struct RuleCost {
  Matrix Q;
  Vector l;
  double k = 0.0;

  RuleCost(const ProblemInstance& instance, const DecisionRule& rule) {
    const auto& f = instance.objective();
    Q = rule.Pi.transpose() * f.H * rule.Pi;
    l = rule.Pi.transpose() * (f.H * rule.pi0 + f.c);
    k = f.value(rule.pi0);
  }
  double operator()(const Vector& u) const { return 0.5 * u.dot(Q * u) + l.dot(u) + k; }
};

struct Cut {
  Vector at;
  double phi;
  Vector grad;
  double operator()(const Vector& v) const { return phi + grad.dot(v - at); }
};

// Fixing the rows active at a probe point gives x(u) = x0 + X u and their
// multipliers l0 + L u. Wherever those multipliers stay nonnegative, x(u)
// solves the problem relaxed to the active rows, so f(x(u)) is a lower bound
// on phi there: phi(u) >= 1/2 u'Pu + p'u + r.
struct Region {
  Matrix P;
  Vector p;
  double r = 0.0;
  Matrix L;
  Vector l0;

  double lower(const Vector& u) const { return 0.5 * u.dot(P * u) + p.dot(u) + r; }

  bool valid_on(const Box& box) const {
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      double lo = l0[i];
      for (Eigen::Index k = 0; k < L.cols(); ++k)
        lo += std::min(L(i, k) * box.lower()[k], L(i, k) * box.upper()[k]);
      if (lo < 0.0) return false;
    }
    return true;
  }

  static std::optional<Region> at(const ProblemInstance& inst, const LowerLevelResult& ll) {
    const auto& f = inst.objective();
    const auto& cs = inst.constraints();
    const double lmax = ll.multipliers.size() ? ll.multipliers.maxCoeff() : 0.0;
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < ll.multipliers.size(); ++i)
      if (ll.multipliers[i] > 1e-9 * std::max(1.0, lmax)) act.push_back(i);
    const Eigen::Index n = inst.n_x(), a = static_cast<Eigen::Index>(act.size()), n_u = inst.n_u();
    if (a > n) return std::nullopt;
    Matrix K = Matrix::Zero(n + a, n + a);
    K.topLeftCorner(n, n) = f.H;
    Matrix rhs = Matrix::Zero(n + a, n_u + 1);
    rhs.col(0).head(n) = -f.c;
    for (Eigen::Index j = 0; j < a; ++j) {
      K.block(n + j, 0, 1, n) = cs.A.row(act[static_cast<std::size_t>(j)]);
      K.block(0, n + j, n, 1) = cs.A.row(act[static_cast<std::size_t>(j)]).transpose();
      rhs(n + j, 0) = cs.b0[act[static_cast<std::size_t>(j)]];
      rhs.block(n + j, 1, 1, n_u) = cs.B.row(act[static_cast<std::size_t>(j)]);
    }
    Eigen::FullPivLU<Matrix> lu(K);
    if (!lu.isInvertible()) return std::nullopt;
    Matrix sol = lu.solve(rhs);
    if (!sol.allFinite() || (K * sol - rhs).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff()))
      return std::nullopt;
    Vector x0 = sol.col(0).head(n);
    Matrix X = sol.block(0, 1, n, n_u);
    Region out;
    out.P = X.transpose() * f.H * X;
    out.p = X.transpose() * (f.H * x0 + f.c);
    out.r = f.value(x0);
    out.l0 = sol.col(0).tail(a);
    out.L = sol.block(n, 1, a, n_u);
    return out;
  }
};

class MaxRegretSearch {
 public:
  MaxRegretSearch(const ProblemInstance& instance, const DecisionRule& rule, const BnbOptions& opt,
                  BnbObserver observer)
      : inst_(instance), opt_(opt), observer_(std::move(observer)), cost_(instance, rule) {}

  // Cuts and exact local models inherited down the tree.
  struct Model {
    std::vector<Cut> cuts;
    std::vector<Region> regions;
  };

  MaxRegretResult run() {
    const Box& root = inst_.u_box();
    if (root.nondegenerate_dims().size() > kMaxVertexDims)
      throw std::invalid_argument("max_regret_global: more than 20 uncertain dimensions");

    Model model;
    probe(root.center(), model);
    if (root.vertex_count() <= opt_.rootVertexProbeLimit)
      for (const auto& v : root.vertices()) probe(v, model);
    trim(model);

    struct Open {
      BnbNode node;
      Model model;
    };
    auto cmp = [](const Open& a, const Open& b) { return a.node.upperBound < b.node.upperBound; };
    std::priority_queue<Open, std::vector<Open>, decltype(cmp)> queue(cmp);
    queue.push({BnbNode{root, std::numeric_limits<double>::infinity(), std::nullopt}, model});

    bool budget_hit = false;
    double pruned = -std::numeric_limits<double>::infinity();
    auto open_bound = [&] {
      return queue.empty() ? -std::numeric_limits<double>::infinity() : queue.top().node.upperBound;
    };
    while (!queue.empty()) {
      if (queue.top().node.upperBound <= best_r_ + opt_.epsBnb) break;
      if (opt_.stopBelow && std::max({best_r_, pruned, open_bound()}) < *opt_.stopBelow) break;
      if (res_.nodesExplored >= opt_.maxNodes) {
        budget_hit = true;
        break;
      }
      Open cur = queue.top();
      queue.pop();
      ++res_.nodesExplored;
      const Box& box = cur.node.subBox;
      if (res_.nodesExplored > 1) {
        double r = probe(box.center(), cur.model);
        cur.node.bestPoint = std::make_pair(box.center(), r);
      }

      Scan sc = scan(box, cur.model.cuts);
      for (int p = 0; p < opt_.vertexProbes && sc.bound > best_r_ + opt_.epsBnb; ++p) {
        if (!probe_once(sc.argmax, cur.model)) break;
        sc = scan(box, cur.model.cuts);
      }
      double bound = sc.bound;
      if (bound > best_r_ + opt_.epsBnb) bound = std::min(bound, local_bound(box, cur.model));
      if (bound > best_r_ + opt_.epsBnb) bound = std::min(bound, joint_bound(box, sc.maxCost));
      cur.node.upperBound = bound;
      if (observer_) observer_(cur.node);
      if (bound <= best_r_ + opt_.epsBnb) {
        pruned = std::max(pruned, bound);
        continue;
      }

      // Split the widest coordinate.
      Vector w = box.width();
      Eigen::Index dim = 0;
      w.maxCoeff(&dim);
      if (w[dim] <= 1e-12 * std::max(1.0, root.width().maxCoeff())) continue;
      double mid = 0.5 * (box.lower()[dim] + box.upper()[dim]);
      Vector lo_hi = box.upper(), hi_lo = box.lower();
      lo_hi[dim] = mid;
      hi_lo[dim] = mid;
      trim(cur.model);
      queue.push({BnbNode{Box(box.lower(), lo_hi), bound, std::nullopt}, cur.model});
      queue.push({BnbNode{Box(hi_lo, box.upper()), bound, std::nullopt}, cur.model});
    }
    const double open = open_bound();
    res_.upperBound = std::max({best_r_, pruned, open});
    res_.converged = !budget_hit || open <= best_r_ + opt_.epsBnb ||
                     (opt_.stopBelow && res_.upperBound < *opt_.stopBelow);
    res_.regretValue = best_r_;
    return res_;
  }

 private:
  // Solve the lower level at u, record cut and local model, update the incumbent.
  double probe(const Vector& u, Model& m) {
    auto ll = lower_level(inst_, u, opt_.kernel);
    ++res_.lowerLevelSolves;
    double r = cost_(u) - ll.phi;
    if (r > best_r_) {
      best_r_ = r;
      res_.u = u;
      res_.phi = ll.phi;
      res_.xStar = ll.xStar;
    }
    m.cuts.push_back({u, ll.phi, ll.phiGradient});
    if (auto reg = Region::at(inst_, ll)) m.regions.push_back(std::move(*reg));
    return r;
  }

  bool probe_once(const Vector& u, Model& m) {
    for (const auto& c : m.cuts)
      if ((c.at - u).cwiseAbs().maxCoeff() == 0.0) return false;
    probe(u, m);
    return true;
  }

  void trim(Model& m) const {
    if (m.cuts.size() > opt_.maxCuts)
      m.cuts.erase(m.cuts.begin(), m.cuts.end() - static_cast<std::ptrdiff_t>(opt_.maxCuts));
    if (m.regions.size() > opt_.maxRegions)
      m.regions.erase(m.regions.begin(), m.regions.end() - static_cast<std::ptrdiff_t>(opt_.maxRegions));
  }

  // Bound from the newest local models valid on the whole sub-box. On such a
  // box regret <= cost(u) - lower(u), a quadratic; its maximum is a convex QP
  // when concave, else bounded through the convex part of its Hessian.
  double local_bound(const Box& box, Model& m) {
    double bound = std::numeric_limits<double>::infinity();
    const auto dims = box.nondegenerate_dims();
    if (dims.empty() || dims.size() > kMaxLocalDims) return bound;
    const Eigen::Index d = static_cast<Eigen::Index>(dims.size());
    for (std::size_t back = 0; back < m.regions.size() && back < 4; ++back) {
      const Region& reg = m.regions[m.regions.size() - 1 - back];
      if (!reg.valid_on(box)) continue;
      // q(u) = 1/2 u'Qd u + ld'u + kd in the free coordinates around the center.
      const Vector c = box.center();
      Matrix Qd = cost_.Q - reg.P;
      const double q0 = cost_(c) - reg.lower(c);
      Vector grad_full = Qd * c + cost_.l - reg.p;
      Matrix Qr(d, d);
      Vector gr(d), half(d);
      for (Eigen::Index a = 0; a < d; ++a) {
        gr[a] = grad_full[dims[static_cast<std::size_t>(a)]];
        half[a] = 0.5 * box.width()[dims[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < d; ++b)
          Qr(a, b) = Qd(dims[static_cast<std::size_t>(a)], dims[static_cast<std::size_t>(b)]);
      }
      Qr = 0.5 * (Qr + Qr.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(Qr);
      const double scale = 1.0 + Qr.cwiseAbs().maxCoeff();
      const double margin = 1e-9 * (1.0 + std::abs(q0) + gr.cwiseAbs().dot(half));
      double value;
      std::optional<Vector> argmax;
      if (es.eigenvalues().maxCoeff() <= 1e-12 * scale) {
        // Concave: maximize over the box, offsets y in [-half, half].
        Matrix G(2 * d, d);
        G << Matrix::Identity(d, d), -Matrix::Identity(d, d);
        Vector h(2 * d);
        h << half, half;
        auto sol = solve_qp({-Qr, -gr, G, h}, opt_.kernel, Vector::Zero(d));
        if (!sol.optimal()) continue;
        value = q0 - sol.value + margin + 10.0 * tol::kkt * (1.0 + std::abs(sol.value));
        Vector u = c;
        for (Eigen::Index a = 0; a < d; ++a) u[dims[static_cast<std::size_t>(a)]] += sol.z[a];
        argmax = box.clamp(u);
      } else {
        Matrix Qp = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
        value = -std::numeric_limits<double>::infinity();
        const std::uint64_t count = std::uint64_t{1} << d;
        Vector y(d);
        for (std::uint64_t i = 0; i < count; ++i) {
          for (Eigen::Index a = 0; a < d; ++a) y[a] = ((i >> a) & 1U) ? half[a] : -half[a];
          value = std::max(value, gr.dot(y) + 0.5 * y.dot(Qp * y));
        }
        value += q0 + margin;
      }
      bound = std::min(bound, value);
      if (argmax && value > best_r_ + opt_.epsBnb) probe_once(*argmax, m);
      if (bound <= best_r_ + opt_.epsBnb) break;
    }
    return bound;
  }

  struct Scan {
    double bound = std::numeric_limits<double>::infinity();
    Vector argmax;
    double maxCost = -std::numeric_limits<double>::infinity();
  };

  // min over cuts of max over sub-box vertices of [cost(v) - cut(v)]: a valid
  // upper bound because cost is convex (its maximum minus an affine function
  // over the box sits at a vertex) and each cut underestimates phi. Vertices
  // are visited in Gray-code order so each step updates cost and cut values
  // in O(d + cuts).
  Scan scan(const Box& box, const std::vector<Cut>& cuts) const {
    const auto dims = box.nondegenerate_dims();
    const std::size_t C = cuts.size();
    Vector v = box.lower();
    Vector Qv = cost_.Q * v;
    double g = cost_(v);
    std::vector<double> lin(C), best(C);
    std::vector<std::uint64_t> arg(C, 0);
    for (std::size_t c = 0; c < C; ++c) {
      lin[c] = cuts[c](v);
      best[c] = g - lin[c];
    }
    Scan out;
    out.maxCost = g;
    std::uint64_t code = 0;
    const std::uint64_t count = box.vertex_count();
    for (std::uint64_t i = 1; i < count; ++i) {
      const auto k = static_cast<std::size_t>(std::countr_zero(i));
      const auto j = dims[k];
      const bool up = !((code >> k) & 1U);
      code ^= std::uint64_t{1} << k;
      const double target = up ? box.upper()[j] : box.lower()[j];
      const double delta = target - v[j];
      g += delta * (Qv[j] + cost_.l[j]) + 0.5 * delta * delta * cost_.Q(j, j);
      Qv.noalias() += delta * cost_.Q.col(j);
      v[j] = target;
      out.maxCost = std::max(out.maxCost, g);
      for (std::size_t c = 0; c < C; ++c) {
        lin[c] += delta * cuts[c].grad[j];
        const double val = g - lin[c];
        if (val > best[c] || (val == best[c] && code < arg[c])) {
          best[c] = val;
          arg[c] = code;
        }
      }
    }
    // Incremental updates drift slightly; widen by a rounding margin.
    const double margin = 1e-12 * static_cast<double>(dims.size() + 1) * (1.0 + std::abs(out.maxCost));
    out.maxCost += margin;
    std::size_t pick = 0;
    for (std::size_t c = 0; c < C; ++c)
      if (best[c] < out.bound) out.bound = best[c], pick = c;
    out.bound += margin;
    out.argmax = box.vertex(C ? arg[pick] : 0);
    return out;
  }

  // max over vertices of cost minus min of phi over the sub-box, the latter as
  // one QP in (x, u).
  double joint_bound(const Box& box, double max_cost) {
    const auto n_x = inst_.n_x();
    const auto n_u = inst_.n_u();
    const auto& f = inst_.objective();
    const auto& cs = inst_.constraints();
    Matrix H = Matrix::Zero(n_x + n_u, n_x + n_u);
    H.topLeftCorner(n_x, n_x) = f.H;
    Vector c = Vector::Zero(n_x + n_u);
    c.head(n_x) = f.c;
    Matrix G = Matrix::Zero(cs.rows() + 2 * n_u, n_x + n_u);
    Vector h(cs.rows() + 2 * n_u);
    G.topLeftCorner(cs.rows(), n_x) = cs.A;
    G.topRightCorner(cs.rows(), n_u) = -cs.B;
    h.head(cs.rows()) = cs.b0;
    for (Eigen::Index k = 0; k < n_u; ++k) {
      G(cs.rows() + 2 * k, n_x + k) = 1.0;
      h[cs.rows() + 2 * k] = box.upper()[k];
      G(cs.rows() + 2 * k + 1, n_x + k) = -1.0;
      h[cs.rows() + 2 * k + 1] = -box.lower()[k];
    }
    Vector start = Vector::Zero(n_x + n_u);
    start.tail(n_u) = box.center();
    auto sol = solve_qp({H, c, G, h}, opt_.kernel, start);
    if (!sol.optimal()) return std::numeric_limits<double>::infinity();
    double min_phi = sol.value + f.d;
    // Slack for the QP's own accuracy.
    min_phi -= 10.0 * tol::kkt * (1.0 + std::abs(min_phi));
    return max_cost - min_phi;
  }

  const ProblemInstance& inst_;
  BnbOptions opt_;
  BnbObserver observer_;
  RuleCost cost_;
  double best_r_ = -std::numeric_limits<double>::infinity();
  MaxRegretResult res_;
};

}  // namespace detail

/// max over u in the box of f(x(u)) - phi(u), to absolute gap opt.epsBnb.
/// Expects a rule that is feasible on the whole box.
inline MaxRegretResult max_regret_global(const ProblemInstance& instance, const DecisionRule& rule,
                                         const BnbOptions& opt = {}, BnbObserver observer = {}) {
  instance.check_rule(rule);
  detail::MaxRegretSearch search(instance, rule, opt, std::move(observer));
  return search.run();
}

inline MaxRegretResult max_regret_global(const ProblemInstance& instance, const DecisionRule& rule,
                                         double epsBnb) {
  BnbOptions opt;
  opt.epsBnb = epsBnb;
  return max_regret_global(instance, rule, opt);
}

}  // namespace regret_adjust
