#pragma once

// Dense two-phase tableau simplex with Bland's rule for
//   min c'z  s.t.  G z <= h,  z free.
// Free variables are split as z = z+ - z-. Intended for small problems.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace regret_adjust::detail {

enum class SimplexStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct SimplexResult {
  SimplexStatus status = SimplexStatus::IterationLimit;
  Eigen::VectorXd z;
  double value = 0.0;
};

class DenseSimplex {
 public:
  DenseSimplex(const Eigen::VectorXd& c, const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
               int max_pivots)
      : c_(c), G_(G), h_(h), max_pivots_(max_pivots) {}

  SimplexResult solve() {
    const Eigen::Index n = c_.size();
    const Eigen::Index k = G_.rows();
    // Columns: z+ (n), z- (n), slack (k), artificial (one per row with h < 0), rhs.
    std::vector<Eigen::Index> art_rows;
    for (Eigen::Index i = 0; i < k; ++i)
      if (h_[i] < 0) art_rows.push_back(i);
    const Eigen::Index na = static_cast<Eigen::Index>(art_rows.size());
    ncols_ = 2 * n + k + na;
    T_ = Eigen::MatrixXd::Zero(k + 1, ncols_ + 1);
    basis_.assign(static_cast<std::size_t>(k), 0);
    Eigen::Index a = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
      double sign = h_[i] < 0 ? -1.0 : 1.0;
      T_.row(i).segment(0, n) = sign * G_.row(i);
      T_.row(i).segment(n, n) = -sign * G_.row(i);
      T_(i, 2 * n + i) = sign;
      T_(i, ncols_) = sign * h_[i];
      if (h_[i] < 0) {
        T_(i, 2 * n + k + a) = 1.0;
        basis_[static_cast<std::size_t>(i)] = 2 * n + k + a;
        ++a;
      } else {
        basis_[static_cast<std::size_t>(i)] = 2 * n + i;
      }
    }

    SimplexResult res;
    if (na > 0) {
      // Phase 1: minimize sum of artificials.
      T_.row(k).setZero();
      for (Eigen::Index j = 0; j < na; ++j) T_(k, 2 * n + k + j) = 1.0;
      price_out(k);
      auto st = iterate(k, ncols_);
      if (st == SimplexStatus::IterationLimit) return res;
      if (-T_(k, ncols_) > 1e-9 * (1.0 + h_.cwiseAbs().maxCoeff())) {
        res.status = SimplexStatus::Infeasible;
        return res;
      }
      // Drive artificials out of the basis where possible.
      for (Eigen::Index i = 0; i < k; ++i) {
        if (basis_[static_cast<std::size_t>(i)] < 2 * n + k) continue;
        for (Eigen::Index j = 0; j < 2 * n + k; ++j) {
          if (std::abs(T_(i, j)) > 1e-9) {
            pivot(i, j);
            break;
          }
        }
      }
    }
    // Phase 2 on original columns only.
    T_.row(k).setZero();
    T_.row(k).segment(0, n) = c_.transpose();
    T_.row(k).segment(n, n) = -c_.transpose();
    price_out(k);
    auto st = iterate(k, 2 * n + k);
    res.status = st;
    if (st != SimplexStatus::Optimal) return res;
    Eigen::VectorXd zz = Eigen::VectorXd::Zero(ncols_);
    for (Eigen::Index i = 0; i < k; ++i) zz[basis_[static_cast<std::size_t>(i)]] = T_(i, ncols_);
    res.z = zz.segment(0, n) - zz.segment(n, n);
    res.value = c_.dot(res.z);
    return res;
  }

 private:
  void price_out(Eigen::Index obj_row) {
    for (Eigen::Index i = 0; i < obj_row; ++i) {
      double coef = T_(obj_row, basis_[static_cast<std::size_t>(i)]);
      if (coef != 0.0) T_.row(obj_row) -= coef * T_.row(i);
    }
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    T_.row(row) /= T_(row, col);
    for (Eigen::Index i = 0; i < T_.rows(); ++i) {
      if (i == row) continue;
      double f = T_(i, col);
      if (f != 0.0) T_.row(i) -= f * T_.row(row);
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  SimplexStatus iterate(Eigen::Index obj_row, Eigen::Index allowed_cols) {
    const double eps = 1e-11;
    for (int it = 0; it < max_pivots_; ++it) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        if (T_(obj_row, j) < -eps) {
          enter = j;  // Bland: lowest index
          break;
        }
      }
      if (enter < 0) return SimplexStatus::Optimal;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < obj_row; ++i) {
        double a = T_(i, enter);
        if (a > eps) {
          double ratio = T_(i, ncols_) / a;
          if (ratio < best - 1e-14 ||
              (std::abs(ratio - best) <= 1e-14 && leave >= 0 &&
               basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return SimplexStatus::Unbounded;
      pivot(leave, enter);
    }
    return SimplexStatus::IterationLimit;
  }

  Eigen::VectorXd c_;
  Eigen::MatrixXd G_;
  Eigen::VectorXd h_;
  int max_pivots_;
  Eigen::Index ncols_ = 0;
  Eigen::MatrixXd T_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace regret_adjust::detail
