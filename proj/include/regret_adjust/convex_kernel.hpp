#pragma once

// Self-contained dense solvers: convex QP, minimax of convex quadratics, LP.

#include "regret_adjust/core.hpp"
#include "regret_adjust/detail/interior_point.hpp"
#include "regret_adjust/detail/simplex.hpp"

#include <string_view>
#include <vector>

namespace regret_adjust {

enum class KernelStatus { Optimal, NearOptimal, Infeasible, Unbounded, IterationLimit };

inline std::string_view to_string(KernelStatus s) {
  switch (s) {
    case KernelStatus::Optimal: return "Optimal";
    case KernelStatus::NearOptimal: return "NearOptimal";
    case KernelStatus::Infeasible: return "Infeasible";
    case KernelStatus::Unbounded: return "Unbounded";
    case KernelStatus::IterationLimit: return "IterationLimit";
  }
  return "?";
}

struct KernelSolution {
  Vector z;
  double value = 0.0;
  KernelStatus status = KernelStatus::IterationLimit;
  double kktResidual = std::numeric_limits<double>::infinity();
  Vector multipliers;       // one per row of G
  Vector pieceMultipliers;  // minimax only
  int iterations = 0;

  bool optimal() const { return status == KernelStatus::Optimal; }
  /// Optimal, or stalled with only the dual residual above tolerance.
  bool usable() const { return optimal() || status == KernelStatus::NearOptimal; }
};

struct KernelOptions {
  int maxIterations = 200;
  double tolerance = 1e-10;
  double acceptable = tol::kkt;
  double nearOptimalDual = 1e-7;
};

/// min 1/2 z'Hz + c'z  s.t.  G z <= h.
struct QpProblem {
  Matrix H;
  Vector c;
  Matrix G;
  Vector h;

  Eigen::Index dim() const { return c.size(); }
};

/// q(z) = 1/2 |F z|^2 + g'z + d, i.e. Hessian F'F kept in factored form.
struct QuadraticPiece {
  Matrix factor;
  Vector linear;
  double constant = 0.0;

  static QuadraticPiece from_objective(const QuadraticObjective& q) {
    QuadraticPiece p;
    p.linear = q.c;
    p.constant = q.d;
    const auto n = q.dim();
    if (n == 0) {
      p.factor = Matrix(0, 0);
      return p;
    }
    if (q.is_diagonal()) {
      p.factor = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) p.factor(i, i) = std::sqrt(std::max(0.0, q.H(i, i)));
      return p;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(q.H);
    const double cut = 1e-14 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i)
      if (es.eigenvalues()[i] > cut) keep.push_back(i);
    p.factor.resize(static_cast<Eigen::Index>(keep.size()), n);
    for (std::size_t r = 0; r < keep.size(); ++r) {
      auto i = keep[r];
      p.factor.row(static_cast<Eigen::Index>(r)) =
          std::sqrt(es.eigenvalues()[i]) * es.eigenvectors().col(i).transpose();
    }
    return p;
  }

  double value(const Vector& z) const {
    double v = linear.dot(z) + constant;
    if (factor.rows()) v += 0.5 * (factor * z).squaredNorm();
    return v;
  }
};

/// min_z max_s q_s(z)  s.t.  G z <= h.
struct MinimaxProblem {
  std::vector<QuadraticPiece> pieces;
  Matrix G;
  Vector h;
  Vector start;  // optional initial z

  Eigen::Index dim() const { return pieces.empty() ? G.cols() : pieces.front().linear.size(); }

  void add(const QuadraticObjective& q) { pieces.push_back(QuadraticPiece::from_objective(q)); }

  double max_piece(const Vector& z) const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& p : pieces) v = std::max(v, p.value(z));
    return v;
  }
};

namespace detail {
inline KernelStatus convert(IpmStatus s) {
  switch (s) {
    case IpmStatus::Optimal: return KernelStatus::Optimal;
    case IpmStatus::NearOptimal: return KernelStatus::NearOptimal;
    case IpmStatus::Infeasible: return KernelStatus::Infeasible;
    case IpmStatus::Unbounded: return KernelStatus::Unbounded;
    case IpmStatus::IterationLimit: return KernelStatus::IterationLimit;
  }
  return KernelStatus::IterationLimit;
}

inline void check_linear_rows(Eigen::Index n, const Matrix& G, const Vector& h) {
  if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != n))
    throw std::invalid_argument("kernel: G must be k x n and h of length k");
}
}  // namespace detail

/// KKT residual of (z, lambda) for a QP, relative to data scale.
inline double qp_kkt_residual(const QpProblem& p, const Vector& z, const Vector& lambda) {
  Vector grad = p.c;
  if (p.H.size()) grad += p.H * z;
  double scale = 1.0 + (p.c.size() ? p.c.cwiseAbs().maxCoeff() : 0.0);
  double primal = 0.0, comp = 0.0;
  if (p.G.rows()) {
    grad += p.G.transpose() * lambda;
    Vector slack = p.h - p.G * z;
    primal = std::max(0.0, -slack.minCoeff()) / (1.0 + p.h.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
      double rn = p.G.row(i).cwiseAbs().maxCoeff();
      double s_scaled = std::max(0.0, slack[i]) / std::max(rn, 1e-300);
      comp = std::max(comp, std::max(0.0, lambda[i]) * rn * s_scaled);
    }
    scale += lambda.cwiseAbs().maxCoeff() * p.G.cwiseAbs().maxCoeff();
  }
  double obj = p.c.dot(z) + (p.H.size() ? 0.5 * z.dot(p.H * z) : 0.0);
  return std::max({grad.cwiseAbs().maxCoeff() / scale, primal, comp / (1.0 + std::abs(obj))});
}

inline KernelSolution solve_qp(const QpProblem& p, const KernelOptions& options = {},
                               const Vector& start = Vector()) {
  const auto n = p.dim();
  if (p.H.size() && (p.H.rows() != n || p.H.cols() != n))
    throw std::invalid_argument("solve_qp: H must be n x n");
  detail::check_linear_rows(n, p.G, p.h);

  detail::IpmProblem ip{p.H, p.c, p.G, p.h, {}};
  detail::InteriorPoint ipm(ip, {options.maxIterations, options.tolerance, options.acceptable, options.nearOptimalDual});
  auto r = ipm.solve(start.size() == n ? start : Vector(Vector::Zero(n)));

  KernelSolution sol;
  sol.status = detail::convert(r.status);
  sol.z = r.z;
  sol.multipliers = r.lambda_linear;
  sol.iterations = r.iterations;
  if (sol.z.size() == n) {
    sol.value = p.c.dot(sol.z) + (p.H.size() ? 0.5 * sol.z.dot(p.H * sol.z) : 0.0);
    sol.kktResidual = sol.status == KernelStatus::Infeasible
                          ? r.certificate_residual
                          : qp_kkt_residual(p, sol.z, sol.multipliers.size() ? sol.multipliers
                                                                              : Vector(Vector::Zero(p.G.rows())));
  }
  return sol;
}

/// Epigraph form min t s.t. q_s(z) <= t, G z <= h, solved by the same
/// interior-point engine with the quadratic rows handled exactly.
inline KernelSolution solve_minimax(const MinimaxProblem& p, const KernelOptions& options = {}) {
  if (p.pieces.empty()) throw std::invalid_argument("solve_minimax: at least one piece required");
  const auto n = p.dim();
  for (const auto& pc : p.pieces)
    if (pc.linear.size() != n || (pc.factor.rows() > 0 && pc.factor.cols() != n))
      throw std::invalid_argument("solve_minimax: inconsistent piece dimensions");
  detail::check_linear_rows(n, p.G, p.h);

  detail::IpmProblem ip;
  ip.c = Vector::Zero(n + 1);
  ip.c[n] = 1.0;
  ip.G = Matrix::Zero(p.G.rows(), n + 1);
  ip.G.leftCols(n) = p.G;
  ip.h = p.h;
  ip.pieces.reserve(p.pieces.size());
  for (const auto& pc : p.pieces) {
    detail::FactoredPiece fp;
    fp.F = Matrix::Zero(pc.factor.rows(), n + 1);
    fp.F.leftCols(n) = pc.factor;
    fp.g = Vector::Zero(n + 1);
    fp.g.head(n) = pc.linear;
    fp.g[n] = -1.0;
    fp.d = pc.constant;
    fp.index();
    ip.pieces.push_back(std::move(fp));
  }
  Vector z0 = Vector::Zero(n + 1);
  if (p.start.size() == n) z0.head(n) = p.start;
  double top = p.max_piece(z0.head(n));
  z0[n] = top + std::max(1.0, 0.1 * std::abs(top));

  detail::InteriorPoint ipm(ip, {options.maxIterations, options.tolerance, options.acceptable, options.nearOptimalDual});
  auto r = ipm.solve(z0);

  KernelSolution sol;
  sol.status = detail::convert(r.status);
  sol.iterations = r.iterations;
  sol.kktResidual = r.kkt_residual;
  sol.multipliers = r.lambda_linear;
  sol.pieceMultipliers = r.lambda_pieces;
  if (r.z.size() == n + 1) {
    sol.z = r.z.head(n);
    sol.value = p.max_piece(sol.z);
  }
  return sol;
}

/// min c'z s.t. G z <= h by dense simplex; optimal solutions are vertices.
inline KernelSolution solve_lp(const Vector& c, const Matrix& G, const Vector& h,
                               int maxPivots = 20000) {
  detail::check_linear_rows(c.size(), G, h);
  detail::DenseSimplex simplex(c, G, h, maxPivots);
  auto r = simplex.solve();
  KernelSolution sol;
  switch (r.status) {
    case detail::SimplexStatus::Optimal: sol.status = KernelStatus::Optimal; break;
    case detail::SimplexStatus::Infeasible: sol.status = KernelStatus::Infeasible; break;
    case detail::SimplexStatus::Unbounded: sol.status = KernelStatus::Unbounded; break;
    case detail::SimplexStatus::IterationLimit: sol.status = KernelStatus::IterationLimit; break;
  }
  if (sol.optimal()) {
    sol.z = r.z;
    sol.value = r.value;
    double viol = G.rows() ? std::max(0.0, (G * r.z - h).maxCoeff()) : 0.0;
    sol.kktResidual = viol / (1.0 + (h.size() ? h.cwiseAbs().maxCoeff() : 0.0));
  }
  return sol;
}

}  // namespace regret_adjust
