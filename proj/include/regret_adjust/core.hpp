#pragma once

// Domain types for affinely adjustable robust programs with a convex quadratic
// objective and linear constraints whose right-hand side is affine in a
// box-shaped uncertain parameter:
//
//   min f(x)  s.t.  A x <= b0 + B u   for all u in [uMin, uMax],
//
// with x replaced by the affine rule x = pi0 + Pi u.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace regret_adjust {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when data violates a structural invariant; `field` names the culprit.
class InvariantError : public std::invalid_argument {
 public:
  InvariantError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// F(u) is empty for some scenario, i.e. the instance has no perfect-information
/// solution there.
class InfeasibleInstanceError : public std::runtime_error {
 public:
  InfeasibleInstanceError(const std::string& what, Vector scenario)
      : std::runtime_error(what), scenario_(std::move(scenario)) {}
  const Vector& scenario() const noexcept { return scenario_; }

 private:
  Vector scenario_;
};

namespace tol {
inline constexpr double psd = 1e-9;     // relative to max |H_ij|
inline constexpr double box = 1e-9;     // relative to box width
inline constexpr double dup = 1e-7;     // relative to box width
inline constexpr double kkt = 1e-8;
inline constexpr double opt = 1e-7;
inline constexpr double feas = 1e-8;
}  // namespace tol

inline void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw InvariantError(field, what);
}

inline double scale_of(const Vector& v) {
  return v.size() == 0 ? 1.0 : std::max(1.0, v.cwiseAbs().maxCoeff());
}

// ---------------------------------------------------------------------------
// Box
// ---------------------------------------------------------------------------

class Box {
 public:
  Box() = default;
  Box(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    require(lower_.size() == upper_.size(), "box", "lower/upper length mismatch");
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
      require(!std::isnan(lower_[i]) && !std::isnan(upper_[i]), "box", "NaN bound");
      require(lower_[i] <= upper_[i], "box",
              "lower > upper in coordinate " + std::to_string(i));
    }
  }

  Eigen::Index dim() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Vector center() const { return 0.5 * (lower_ + upper_); }
  Vector width() const { return upper_ - lower_; }

  bool degenerate(Eigen::Index i) const { return lower_[i] == upper_[i]; }

  std::vector<Eigen::Index> nondegenerate_dims() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (!degenerate(i)) out.push_back(i);
    return out;
  }

  /// 2^(number of nondegenerate coordinates).
  std::uint64_t vertex_count() const {
    auto d = nondegenerate_dims().size();
    if (d >= 63) throw std::invalid_argument("box: too many dimensions to count vertices");
    return std::uint64_t{1} << d;
  }

  /// Vertex `index`: bit k selects upper for the k-th nondegenerate coordinate.
  Vector vertex(std::uint64_t index) const {
    Vector v = lower_;
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < dim(); ++i) {
      if (degenerate(i)) continue;
      if ((index >> k) & 1U) v[i] = upper_[i];
      ++k;
    }
    return v;
  }

  std::vector<Vector> vertices() const {
    std::vector<Vector> out;
    const auto count = vertex_count();
    out.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) out.push_back(vertex(k));
    return out;
  }

  bool contains(const Vector& u, double rel_tol = tol::box) const {
    if (u.size() != dim()) return false;
    for (Eigen::Index i = 0; i < dim(); ++i) {
      double slack = rel_tol * std::max(1.0, upper_[i] - lower_[i]);
      if (u[i] < lower_[i] - slack || u[i] > upper_[i] + slack) return false;
    }
    return true;
  }

  bool is_vertex(const Vector& u) const {
    if (u.size() != dim()) return false;
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (u[i] != lower_[i] && u[i] != upper_[i]) return false;
    return true;
  }

  Vector clamp(const Vector& u) const { return u.cwiseMax(lower_).cwiseMin(upper_); }

  bool operator==(const Box& o) const { return lower_ == o.lower_ && upper_ == o.upper_; }

 private:
  Vector lower_;
  Vector upper_;
};

// ---------------------------------------------------------------------------
// Objective, constraints, mask
// ---------------------------------------------------------------------------

/// f(x) = 1/2 x'Hx + c'x + d with H symmetric positive semidefinite.
struct QuadraticObjective {
  Matrix H;
  Vector c;
  double d = 0.0;

  QuadraticObjective() = default;
  QuadraticObjective(Matrix H_, Vector c_, double d_) : H(std::move(H_)), c(std::move(c_)), d(d_) {
    validate();
  }

  Eigen::Index dim() const { return c.size(); }

  void validate() const {
    require(H.rows() == H.cols() && H.rows() == c.size(), "objective",
            "H must be n x n with n = len(c)");
    double scale = H.size() == 0 ? 0.0 : H.cwiseAbs().maxCoeff();
    require(((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, scale)) ||
                H.size() == 0,
            "objective", "H is not symmetric");
    if (H.size() == 0 || scale == 0.0) return;
    Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -tol::psd * scale, "objective",
            "H is not positive semidefinite");
  }

  double value(const Vector& x) const { return 0.5 * x.dot(H * x) + c.dot(x) + d; }
  Vector gradient(const Vector& x) const { return H * x + c; }

  bool is_diagonal() const {
    return (H - Matrix(H.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  }

  bool operator==(const QuadraticObjective& o) const {
    return H == o.H && c == o.c && d == o.d;
  }
};

/// A x <= b0 + B u.
struct ConstraintSystem {
  Matrix A;
  Vector b0;
  Matrix B;

  ConstraintSystem() = default;
  ConstraintSystem(Matrix A_, Vector b0_, Matrix B_)
      : A(std::move(A_)), b0(std::move(b0_)), B(std::move(B_)) {
    require(A.rows() == b0.size() && B.rows() == b0.size(), "constraints",
            "A, b0 and B must have the same number of rows");
  }

  Eigen::Index rows() const { return b0.size(); }
  Vector rhs(const Vector& u) const { return b0 + B * u; }

  bool operator==(const ConstraintSystem& o) const {
    return A == o.A && b0 == o.b0 && B == o.B;
  }
};

/// Entry (i, j) is true iff decision i may react to uncertain coordinate j.
class AdjustabilityMask {
 public:
  AdjustabilityMask() = default;
  AdjustabilityMask(Eigen::Index n_x, Eigen::Index n_u, bool value = true)
      : n_x_(n_x), n_u_(n_u), bits_(static_cast<std::size_t>(n_x * n_u), value) {}

  static AdjustabilityMask full(Eigen::Index n_x, Eigen::Index n_u) { return {n_x, n_u, true}; }

  /// Pump-style information basis: decision (p, t), stored at index p*T + t,
  /// may observe u(r) iff r <= t - kappa (1-based periods).
  static AdjustabilityMask causal(int kappa, int pumps, int periods) {
    AdjustabilityMask m(Eigen::Index{pumps} * periods, periods, false);
    for (int p = 0; p < pumps; ++p)
      for (int t = 0; t < periods; ++t)
        for (int r = 0; r < periods; ++r)
          if (r <= t - kappa) m.set(Eigen::Index{p} * periods + t, r, true);
    return m;
  }

  Eigen::Index n_x() const { return n_x_; }
  Eigen::Index n_u() const { return n_u_; }

  bool allows(Eigen::Index i, Eigen::Index j) const {
    return bits_[static_cast<std::size_t>(i * n_u_ + j)];
  }
  void set(Eigen::Index i, Eigen::Index j, bool v) {
    bits_[static_cast<std::size_t>(i * n_u_ + j)] = v;
  }

  std::size_t free_count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
  }

  bool operator==(const AdjustabilityMask& o) const {
    return n_x_ == o.n_x_ && n_u_ == o.n_u_ && bits_ == o.bits_;
  }

 private:
  Eigen::Index n_x_ = 0;
  Eigen::Index n_u_ = 0;
  std::vector<bool> bits_;
};

// ---------------------------------------------------------------------------
// Decision rule
// ---------------------------------------------------------------------------

/// x(u) = pi0 + Pi u with |Pi_ij| <= N.
struct DecisionRule {
  Vector pi0;
  Matrix Pi;
  double N = std::numeric_limits<double>::infinity();

  DecisionRule() = default;
  DecisionRule(Vector pi0_, Matrix Pi_, double N_) : pi0(std::move(pi0_)), Pi(std::move(Pi_)), N(N_) {
    require(Pi.rows() == pi0.size(), "rule", "Pi must have len(pi0) rows");
    require(N > 0, "rule", "bound N must be positive");
  }

  /// The rule that ignores u.
  static DecisionRule constant(const Vector& x, Eigen::Index n_u, double N) {
    return {x, Matrix::Zero(x.size(), n_u), N};
  }

  Eigen::Index n_x() const { return pi0.size(); }
  Eigen::Index n_u() const { return Pi.cols(); }

  Vector realize(const Vector& u) const { return pi0 + Pi * u; }

  bool within_bound(double slack = 0.0) const {
    return Pi.size() == 0 || Pi.cwiseAbs().maxCoeff() <= N * (1.0 + slack);
  }

  bool respects(const AdjustabilityMask& mask) const {
    if (mask.n_x() != n_x() || mask.n_u() != n_u()) return false;
    for (Eigen::Index i = 0; i < n_x(); ++i)
      for (Eigen::Index j = 0; j < n_u(); ++j)
        if (!mask.allows(i, j) && Pi(i, j) != 0.0) return false;
    return true;
  }

  bool operator==(const DecisionRule& o) const { return pi0 == o.pi0 && Pi == o.Pi && N == o.N; }
};

/// pi = [pi0; Pi row-major], length (n_u + 1) * n_x.
inline Vector flatten(const DecisionRule& rule) {
  const auto n_x = rule.n_x();
  const auto n_u = rule.n_u();
  Vector pi(n_x * (n_u + 1));
  pi.head(n_x) = rule.pi0;
  for (Eigen::Index i = 0; i < n_x; ++i)
    for (Eigen::Index j = 0; j < n_u; ++j) pi[n_x + i * n_u + j] = rule.Pi(i, j);
  return pi;
}

inline DecisionRule unflatten(const Vector& pi, Eigen::Index n_x, Eigen::Index n_u, double N) {
  require(pi.size() == n_x * (n_u + 1), "rule", "flattened length must be (n_u+1)*n_x");
  Matrix Pi(n_x, n_u);
  for (Eigen::Index i = 0; i < n_x; ++i)
    for (Eigen::Index j = 0; j < n_u; ++j) Pi(i, j) = pi[n_x + i * n_u + j];
  return {pi.head(n_x), Pi, N};
}

/// Map pi -> x(u) as a matrix acting on the flattened rule: x(u) = X(u) pi.
inline Matrix realization_matrix(Eigen::Index n_x, const Vector& u) {
  const auto n_u = u.size();
  Matrix X = Matrix::Zero(n_x, n_x * (n_u + 1));
  for (Eigen::Index i = 0; i < n_x; ++i) {
    X(i, i) = 1.0;
    for (Eigen::Index j = 0; j < n_u; ++j) X(i, n_x + i * n_u + j) = u[j];
  }
  return X;
}

/// A^pi(u), satisfying A^pi(u) * pi == A * (pi0 + Pi u).
inline Matrix rule_constraint_matrix(const Matrix& A, const Vector& u) {
  return A * realization_matrix(A.cols(), u);
}

// ---------------------------------------------------------------------------
// Problem instance
// ---------------------------------------------------------------------------

class ProblemInstance {
 public:
  ProblemInstance() = default;

  ProblemInstance(std::string name, QuadraticObjective objective, ConstraintSystem general,
                  Box u_box, Box x_box, AdjustabilityMask mask, double N,
                  std::optional<Vector> nominal = std::nullopt)
      : name_(std::move(name)),
        objective_(std::move(objective)),
        general_(std::move(general)),
        u_box_(std::move(u_box)),
        x_box_(std::move(x_box)),
        mask_(std::move(mask)),
        N_(N),
        nominal_(std::move(nominal)) {
    const auto n_x = objective_.dim();
    const auto n_u = u_box_.dim();
    objective_.validate();
    require(general_.A.cols() == n_x, "constraints", "A must have n_x columns");
    require(general_.B.cols() == n_u, "constraints", "B must have n_u columns");
    require(x_box_.dim() == n_x, "xBox", "dimension must equal n_x");
    require(mask_.n_x() == n_x && mask_.n_u() == n_u, "mask", "shape must be n_x x n_u");
    require(N_ > 0 && !std::isnan(N_), "N", "must be positive");
    if (nominal_) {
      require(nominal_->size() == n_u, "nominal", "length must equal n_u");
      require(u_box_.contains(*nominal_), "nominal", "must lie in uBox");
    }
    fold_box();
  }

  const std::string& name() const { return name_; }
  const QuadraticObjective& objective() const { return objective_; }
  /// Rows as given, without the folded variable bounds.
  const ConstraintSystem& general_constraints() const { return general_; }
  /// General rows followed by finite xBox bounds.
  const ConstraintSystem& constraints() const { return folded_; }
  const Box& u_box() const { return u_box_; }
  const Box& x_box() const { return x_box_; }
  const AdjustabilityMask& mask() const { return mask_; }
  double N() const { return N_; }
  const std::optional<Vector>& nominal() const { return nominal_; }

  Eigen::Index n_x() const { return objective_.dim(); }
  Eigen::Index n_u() const { return u_box_.dim(); }
  Eigen::Index m() const { return folded_.rows(); }

  /// Magnitude of each folded row's right-hand side over the box; violations
  /// divided by this are compared against relative feasibility tolerances.
  const Vector& row_scales() const { return row_scales_; }

  /// (n_u+1)*n_x minus masked-out entries of Pi.
  std::size_t free_parameter_count() const {
    return static_cast<std::size_t>(n_x()) + mask_.free_count();
  }

  void check_scenario(const Vector& u) const {
    if (u.size() != n_u()) throw std::invalid_argument("scenario has wrong dimension");
  }

  void check_rule(const DecisionRule& rule) const {
    if (rule.n_x() != n_x() || rule.n_u() != n_u())
      throw std::invalid_argument("decision rule has wrong dimensions");
  }

  bool operator==(const ProblemInstance& o) const {
    return name_ == o.name_ && objective_ == o.objective_ && general_ == o.general_ &&
           u_box_ == o.u_box_ && x_box_ == o.x_box_ && mask_ == o.mask_ && N_ == o.N_ &&
           nominal_.has_value() == o.nominal_.has_value() &&
           (!nominal_ || *nominal_ == *o.nominal_);
  }

 private:
  void fold_box() {
    const auto n_x = this->n_x();
    const auto n_u = this->n_u();
    std::vector<std::pair<Eigen::Index, double>> rows;  // (signed index + 1, rhs)
    for (Eigen::Index i = 0; i < n_x; ++i) {
      if (std::isfinite(x_box_.upper()[i])) rows.emplace_back(i + 1, x_box_.upper()[i]);
      if (std::isfinite(x_box_.lower()[i])) rows.emplace_back(-(i + 1), -x_box_.lower()[i]);
    }
    const auto g = general_.rows();
    const auto total = g + static_cast<Eigen::Index>(rows.size());
    Matrix A = Matrix::Zero(total, n_x);
    Vector b0(total);
    Matrix B = Matrix::Zero(total, n_u);
    A.topRows(g) = general_.A;
    b0.head(g) = general_.b0;
    B.topRows(g) = general_.B;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      auto r = g + static_cast<Eigen::Index>(k);
      auto [idx, rhs] = rows[k];
      A(r, std::abs(idx) - 1) = idx > 0 ? 1.0 : -1.0;
      b0[r] = rhs;
    }
    folded_ = ConstraintSystem(std::move(A), std::move(b0), std::move(B));
    Vector reach = u_box_.lower().cwiseAbs().cwiseMax(u_box_.upper().cwiseAbs());
    row_scales_ = (folded_.b0.cwiseAbs() + folded_.B.cwiseAbs() * reach).cwiseMax(1.0);
  }

  std::string name_;
  QuadraticObjective objective_;
  ConstraintSystem general_;
  ConstraintSystem folded_;
  Box u_box_;
  Box x_box_;
  AdjustabilityMask mask_;
  double N_ = 1.0;
  std::optional<Vector> nominal_;
  Vector row_scales_;
};

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

struct ScenarioEntry {
  Vector u;
  double phi = 0.0;
  Vector x_star;
};

/// Ordered scenario set with cached perfect-information values.
class Discretization {
 public:
  Discretization() = default;
  explicit Discretization(Box u_box) : u_box_(std::move(u_box)) {}

  const Box& u_box() const { return u_box_; }
  const std::vector<ScenarioEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const ScenarioEntry& operator[](std::size_t k) const { return entries_[k]; }

  /// Index of a stored scenario within tol::dup (scaled by box width) of u.
  std::optional<std::size_t> find(const Vector& u) const {
    for (std::size_t k = 0; k < entries_.size(); ++k)
      if (close(entries_[k].u, u)) return k;
    return std::nullopt;
  }

  /// Returns false (and stores nothing) when u duplicates a stored scenario.
  bool add(ScenarioEntry entry) {
    require(u_box_.contains(entry.u), "discretization", "scenario outside uBox");
    if (find(entry.u)) return false;
    entry.u = u_box_.clamp(entry.u);
    entries_.push_back(std::move(entry));
    return true;
  }

 private:
  bool close(const Vector& a, const Vector& b) const {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      double w = std::max(1.0, u_box_.upper()[i] - u_box_.lower()[i]);
      if (std::abs(a[i] - b[i]) > tol::dup * w) return false;
    }
    return true;
  }

  Box u_box_;
  std::vector<ScenarioEntry> entries_;
};

// ---------------------------------------------------------------------------
// Exact evaluation under a rule
// ---------------------------------------------------------------------------

inline void check_rule_scenario(const DecisionRule& rule, const ProblemInstance& instance,
                                const Vector& u) {
  instance.check_rule(rule);
  instance.check_scenario(u);
}

/// f(pi0 + Pi u).
inline double evaluate_objective(const DecisionRule& rule, const ProblemInstance& instance,
                                 const Vector& u) {
  check_rule_scenario(rule, instance, u);
  return instance.objective().value(rule.realize(u));
}

/// Per-row slack violation A x(u) - b(u).
inline Vector row_violations(const DecisionRule& rule, const ProblemInstance& instance,
                             const Vector& u) {
  check_rule_scenario(rule, instance, u);
  const auto& cs = instance.constraints();
  return cs.A * rule.realize(u) - cs.rhs(u);
}

/// max_j (A x(u) - b(u))_j; <= 0 means the rule is feasible at u.
inline double max_violation(const DecisionRule& rule, const ProblemInstance& instance,
                            const Vector& u) {
  Vector v = row_violations(rule, instance, u);
  return v.size() == 0 ? -std::numeric_limits<double>::infinity() : v.maxCoeff();
}

/// f(x(u)) - phi, where phi must be the optimal value of the scenario problem.
inline double regret(const DecisionRule& rule, const ProblemInstance& instance, const Vector& u,
                     double phi) {
  return evaluate_objective(rule, instance, u) - phi;
}

/// max_j of violation_j / row_scale_j.
inline double max_scaled_violation(const DecisionRule& rule, const ProblemInstance& instance,
                                   const Vector& u) {
  Vector v = row_violations(rule, instance, u).cwiseQuotient(instance.row_scales());
  return v.size() == 0 ? -std::numeric_limits<double>::infinity() : v.maxCoeff();
}

}  // namespace regret_adjust
