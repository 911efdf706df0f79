#pragma once

// Dense primal-dual interior-point method for
//
//   min  1/2 z'Hz + c'z
//   s.t. G z <= h
//        1/2 |F_s z|^2 + g_s'z + d_s <= 0   (convex quadratic rows)
//
// Every row carries an explicit slack, so the start point may be infeasible.
// Mehrotra predictor-corrector on the reduced normal equations
//   (H + sum_s lambda_s F_s'F_s + J' diag(lambda/s) J) dz = rhs,
// where J stacks the (row-normalized) linear rows and the piece gradients.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace regret_adjust::detail {

struct FactoredPiece {
  Eigen::MatrixXd F;  // r x n
  Eigen::VectorXd g;
  double d = 0.0;
  std::vector<std::vector<int>> row_support;  // nonzero columns per row of F

  void index() {
    row_support.assign(static_cast<std::size_t>(F.rows()), {});
    for (Eigen::Index r = 0; r < F.rows(); ++r)
      for (Eigen::Index j = 0; j < F.cols(); ++j)
        if (F(r, j) != 0.0) row_support[static_cast<std::size_t>(r)].push_back(static_cast<int>(j));
  }

  double value(const Eigen::VectorXd& z) const {
    double v = g.dot(z) + d;
    if (F.rows()) v += 0.5 * (F * z).squaredNorm();
    return v;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out = g;
    if (F.rows()) out.noalias() += F.transpose() * (F * z);
    return out;
  }
};

enum class IpmStatus { Optimal, NearOptimal, Infeasible, Unbounded, IterationLimit };

struct IpmOptions {
  int max_iterations = 200;
  double tolerance = 1e-10;  // target relative KKT residual
  double acceptable = 1e-8;  // accepted when progress stalls
  /// Dual residual still reported as NearOptimal once progress stalls with the
  /// other residuals acceptable. Without strict complementarity the dual end
  /// game bottoms out near the square root of machine precision.
  double near_dual = 1e-7;
};

struct IpmResult {
  IpmStatus status = IpmStatus::IterationLimit;
  Eigen::VectorXd z;
  Eigen::VectorXd lambda_linear;
  Eigen::VectorXd lambda_pieces;
  double objective = 0.0;
  double kkt_residual = std::numeric_limits<double>::infinity();
  double certificate_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

struct IpmProblem {
  Eigen::MatrixXd H;  // empty means zero
  Eigen::VectorXd c;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  std::vector<FactoredPiece> pieces;
};

class InteriorPoint {
 public:
  InteriorPoint(const IpmProblem& problem, IpmOptions options)
      : p_(problem), opt_(options), n_(problem.c.size()), k_(problem.G.rows()),
        q_(static_cast<Eigen::Index>(problem.pieces.size())), m_(k_ + q_) {}

  IpmResult solve(const Eigen::VectorXd& z0) {
    using Eigen::VectorXd;
    normalize_rows();

    IpmResult res;
    VectorXd z = z0;
    const double h_scale = 1.0 + (k_ ? hn_.cwiseAbs().maxCoeff() : 0.0);
    const double c_scale = 1.0 + (n_ ? p_.c.cwiseAbs().maxCoeff() : 0.0);

    // Slacks and multipliers for all m_ rows: linear first, then pieces.
    VectorXd s(m_), lam(m_);
    {
      VectorXd r = -row_values(z);
      double floor = std::max(1.0, 0.1 * (m_ ? r.cwiseAbs().maxCoeff() : 0.0));
      for (Eigen::Index i = 0; i < m_; ++i) s[i] = std::max(r[i], floor);
      lam = s.cwiseInverse().cwiseMax(1.0);
    }

    double best_kkt = std::numeric_limits<double>::infinity();
    int stall = 0;
    IpmResult near;
    Eigen::MatrixXd J(m_, n_);

    for (int it = 0; it < opt_.max_iterations; ++it) {
      res.iterations = it;
      jacobian(z, J);
      VectorXd rd = p_.c;
      if (p_.H.size()) rd.noalias() += p_.H * z;
      if (m_) rd.noalias() += J.transpose() * lam;
      VectorXd rp = m_ ? VectorXd(row_values(z) + s) : VectorXd();
      double comp = m_ ? s.dot(lam) : 0.0;
      double mu = m_ ? comp / static_cast<double>(m_) : 0.0;
      double obj = objective(z);

      // Dual residual relative to the size of the terms that cancel in it.
      VectorXd terms = p_.c.cwiseAbs();
      if (p_.H.size()) terms += (p_.H * z).cwiseAbs();
      if (m_) terms.noalias() += J.cwiseAbs().transpose() * lam;
      double dual_scale = std::max(c_scale, 1.0 + (n_ ? terms.maxCoeff() : 0.0));
      double dual_res = rd.size() ? rd.cwiseAbs().maxCoeff() / dual_scale : 0.0;
      double primal_res = m_ ? rp.cwiseAbs().maxCoeff() / h_scale : 0.0;
      double gap_res = comp / (1.0 + std::abs(obj));
      double kkt = std::max({dual_res, primal_res, gap_res});
      if (!std::isfinite(kkt)) break;

      if (dual_res <= opt_.near_dual && std::max(primal_res, gap_res) <= opt_.acceptable && kkt < near.kkt_residual)
        store(near, z, lam, obj, kkt);
      if (kkt < best_kkt) {
        stall = kkt < 0.5 * best_kkt ? 0 : stall + 1;
        best_kkt = kkt;
        store(res, z, lam, obj, kkt);
      } else {
        ++stall;
      }
      if (kkt <= opt_.tolerance) {
        res.status = IpmStatus::Optimal;
        return finish(res);
      }
      if (stall >= 8 && best_kkt <= opt_.acceptable) {
        res.status = IpmStatus::Optimal;
        return finish(res);
      }
      if (stall >= 8 && near.z.size()) {
        near.iterations = it;
        near.status = IpmStatus::NearOptimal;
        return finish(near);
      }
      if (k_ && farkas_infeasible(lam, z, res)) return finish(res);
      if (z.size() && z.cwiseAbs().maxCoeff() > 1e14 * h_scale) {
        res.status = IpmStatus::Unbounded;
        res.z = z;
        return finish(res);
      }

      // Curvature part alone, then the normal matrix on top of it.
      Eigen::MatrixXd KH = Eigen::MatrixXd::Zero(n_, n_);
      if (p_.H.size()) KH = p_.H;
      double lq_max = q_ ? lam.tail(q_).maxCoeff() : 0.0;
      for (Eigen::Index j = 0; j < q_; ++j) {
        double w = lam[k_ + j];
        if (w >= 1e-16 * lq_max) add_piece_hessian(KH, j, w);
      }
      KH.triangularView<Eigen::StrictlyUpper>() = KH.transpose();
      Eigen::MatrixXd K = KH;
      VectorXd dscale = m_ ? VectorXd(lam.cwiseQuotient(s)) : VectorXd();
      if (m_) {
        Eigen::MatrixXd Js = dscale.cwiseSqrt().asDiagonal() * J;
        K.selfadjointView<Eigen::Lower>().rankUpdate(Js.transpose());
        K.triangularView<Eigen::StrictlyUpper>() = K.transpose();
      }
      double reg = 1e-14 * std::max(1.0, K.diagonal().cwiseAbs().maxCoeff());
      Eigen::LDLT<Eigen::MatrixXd> ldlt;
      for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd Kr = K;
        Kr.diagonal().array() += reg;
        ldlt.compute(Kr);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) break;
        reg *= 100.0;
      }

      auto direction = [&](const VectorXd& tau, const VectorXd& rp, VectorXd& dz, VectorXd& ds, VectorXd& dl) {
        VectorXd rhs = -rd;
        VectorXd w;
        if (m_) {
          w = (tau - s.cwiseProduct(lam) + lam.cwiseProduct(rp)).cwiseQuotient(s);
          rhs.noalias() -= J.transpose() * w;
        }
        dz = ldlt.solve(rhs);
        // Refine against the unreduced system: the normal matrix carries huge
        // weights near the boundary and loses the small curvature terms.
        for (int pass = 0; pass < 4; ++pass) {
          VectorXd r = rhs - KH * dz;
          if (m_) r.noalias() -= J.transpose() * dscale.cwiseProduct(J * dz);
          if (!(r.cwiseAbs().maxCoeff() > 1e-3 * opt_.tolerance * dual_scale)) break;
          dz += ldlt.solve(r);
        }
        if (m_) {
          VectorXd Jdz = J * dz;
          ds = -rp - Jdz;
          dl = w + lam.cwiseProduct(Jdz).cwiseQuotient(s);
        }
      };

      VectorXd dz, ds, dl;
      direction(VectorXd::Zero(m_), rp, dz, ds, dl);
      double a_aff = std::min({max_step(s, ds), max_step(lam, dl), 1.0});
      VectorXd tau = VectorXd::Zero(m_);
      if (m_) {
        double mu_aff = (s + a_aff * ds).dot(lam + a_aff * dl) / static_cast<double>(m_);
        double sigma = mu > 0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;
        // Keep complementarity from running ahead of feasibility.
        double target = sigma * mu;
        double lag = std::max(dual_res, primal_res);
        if (gap_res < 0.1 * lag) {
          sigma = std::max(sigma, 0.5);
          target = std::max(sigma * mu, 0.1 * lag * (1.0 + std::abs(obj)) / static_cast<double>(m_));
        }
        tau = VectorXd::Constant(m_, target) - ds.cwiseProduct(dl);
      }
      direction(tau, rp, dz, ds, dl);
      if (!dz.allFinite()) break;

      auto step_to_boundary = [&](const VectorXd& ds, const VectorXd& dl) {
        double a_max = m_ ? std::min(max_step(s, ds), max_step(lam, dl)) : std::numeric_limits<double>::infinity();
        return std::min(a_max >= 1.0 / 0.995 ? 1.0 : 0.995 * a_max, 1.0);
      };
      double alpha = step_to_boundary(ds, dl);

      // Second-order correction: pieces curve above their linearization, so
      // fold that excess into the primal target and keep the better step.
      if (q_ && alpha > 0) {
        auto trial_primal = [&](const VectorXd& dz, const VectorXd& ds, double a) {
          return (row_values(z + a * dz) + s + a * ds).cwiseAbs().maxCoeff() / h_scale;
        };
        double before = trial_primal(dz, ds, alpha);
        if (before > std::max(0.5 * primal_res, 0.1 * opt_.tolerance)) {
          VectorXd excess = row_values(z + alpha * dz) - row_values(z) - alpha * (J * dz);
          excess.head(k_).setZero();
          VectorXd dz2, ds2, dl2;
          direction(tau, VectorXd(rp + excess / alpha), dz2, ds2, dl2);
          double alpha2 = step_to_boundary(ds2, dl2);
          if (dz2.allFinite() && alpha2 > 0 && trial_primal(dz2, ds2, alpha2) < before) {
            dz = std::move(dz2);
            ds = std::move(ds2);
            dl = std::move(dl2);
            alpha = alpha2;
          }
        }
      }
      if (!(alpha > 1e-14)) break;
      z += alpha * dz;
      if (m_) {
        s = (s + alpha * ds).cwiseMax(1e-300);
        lam = (lam + alpha * dl).cwiseMax(1e-300);
      }
    }
    res.status = res.kkt_residual <= opt_.acceptable ? IpmStatus::Optimal : IpmStatus::IterationLimit;
    if (res.status == IpmStatus::IterationLimit && near.z.size()) {
      near.iterations = res.iterations;
      near.status = IpmStatus::NearOptimal;
      return finish(near);
    }
    if (res.status == IpmStatus::IterationLimit && m_ && res.z.size() == n_) {
      VectorXd viol = row_values(res.z);
      if (viol.maxCoeff() > 1e-6 * h_scale) res.status = IpmStatus::Infeasible;
    }
    return finish(res);
  }

 private:
  void normalize_rows() {
    Gn_ = p_.G;
    hn_ = p_.h;
    row_scale_ = Eigen::VectorXd::Ones(k_);
    for (Eigen::Index i = 0; i < k_; ++i) {
      double nrm = Gn_.row(i).cwiseAbs().maxCoeff();
      if (nrm > 0) {
        row_scale_[i] = nrm;
        Gn_.row(i) /= nrm;
        hn_[i] /= nrm;
      }
    }
  }

  // Constraint function values (<= 0 means satisfied).
  Eigen::VectorXd row_values(const Eigen::VectorXd& z) const {
    Eigen::VectorXd v(m_);
    if (k_) v.head(k_) = Gn_ * z - hn_;
    for (Eigen::Index j = 0; j < q_; ++j) v[k_ + j] = p_.pieces[static_cast<std::size_t>(j)].value(z);
    return v;
  }

  void jacobian(const Eigen::VectorXd& z, Eigen::MatrixXd& J) const {
    if (k_) J.topRows(k_) = Gn_;
    for (Eigen::Index j = 0; j < q_; ++j)
      J.row(k_ + j) = p_.pieces[static_cast<std::size_t>(j)].gradient(z).transpose();
  }

  double objective(const Eigen::VectorXd& z) const {
    double v = p_.c.dot(z);
    if (p_.H.size()) v += 0.5 * z.dot(p_.H * z);
    return v;
  }

  // K += w * F'F (lower triangle) using the row supports of F.
  void add_piece_hessian(Eigen::MatrixXd& K, Eigen::Index j, double w) const {
    const auto& pc = p_.pieces[static_cast<std::size_t>(j)];
    for (Eigen::Index r = 0; r < pc.F.rows(); ++r) {
      const auto& sup = pc.row_support[static_cast<std::size_t>(r)];
      for (std::size_t a = 0; a < sup.size(); ++a) {
        double fa = w * pc.F(r, sup[a]);
        for (std::size_t b = 0; b <= a; ++b) K(sup[a], sup[b]) += fa * pc.F(r, sup[b]);
      }
    }
  }

  static double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
    return a;
  }

  // Farkas-type evidence on the linear rows: y >= 0 with G'y ~ 0 and h'y < 0.
  bool farkas_infeasible(const Eigen::VectorXd& lam, const Eigen::VectorXd& z, IpmResult& res) const {
    if (q_ > 0) return false;
    Eigen::VectorXd ly = lam.head(k_);
    double total = ly.sum();
    if (!(total > 1e8)) return false;
    Eigen::VectorXd y = ly / total;
    double hy = hn_.dot(y);
    double gy = (Gn_.transpose() * y).cwiseAbs().sum();
    double reach = std::max(1.0, z.cwiseAbs().maxCoeff());
    if (hy < 0 && gy * 100.0 * reach < -hy) {
      res.status = IpmStatus::Infeasible;
      res.certificate_residual = gy;
      res.z = z;
      return true;
    }
    return false;
  }

  void store(IpmResult& res, const Eigen::VectorXd& z, const Eigen::VectorXd& lam, double obj,
             double kkt) const {
    res.z = z;
    res.lambda_linear = k_ ? Eigen::VectorXd(lam.head(k_).cwiseQuotient(row_scale_)) : Eigen::VectorXd();
    res.lambda_pieces = lam.tail(q_);
    res.objective = obj;
    res.kkt_residual = kkt;
  }

  IpmResult& finish(IpmResult& res) const {
    if (res.z.size() == n_) res.objective = objective(res.z);
    return res;
  }

  const IpmProblem& p_;
  IpmOptions opt_;
  Eigen::Index n_, k_, q_, m_;
  Eigen::MatrixXd Gn_;
  Eigen::VectorXd hn_;
  Eigen::VectorXd row_scale_;
};

}  // namespace regret_adjust::detail
