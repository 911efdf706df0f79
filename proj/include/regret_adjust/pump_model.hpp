#pragma once

// Pump scheduling with one storage tank: P pumps over T periods, uncertain
// demand per period, tank level kept inside bounds. Decision index p*T + t.

#include "regret_adjust/core.hpp"

#include <map>

namespace regret_adjust {

struct PumpParams {
  std::string name;
  int P = 1;
  int T = 1;
  int kappa = 1;
  double N = 1.0;
  double areaA = 1.0;
  double hMin = 0.0;
  double hMax = 0.0;
  double hMinT = 0.0;
  double h0 = 0.0;
  std::vector<double> e;   // price per period (T)
  std::vector<double> c2;  // per pump (P)
  std::vector<double> c1;
  std::vector<double> c0;
  std::vector<double> Q;
  std::vector<double> uMin;  // per period (T)
  std::vector<double> uMax;
  std::optional<std::vector<double>> uNominal;

  bool operator==(const PumpParams&) const = default;

  void validate() const {
    require(P >= 1 && T >= 1, "pumpParams", "P and T must be positive");
    require(kappa >= 0, "pumpParams", "kappa must be nonnegative");
    auto sized = [](const std::vector<double>& v, int n) { return static_cast<int>(v.size()) == n; };
    require(sized(e, T) && sized(uMin, T) && sized(uMax, T), "pumpParams",
            "e, uMin, uMax must have T entries");
    require(sized(c2, P) && sized(c1, P) && sized(c0, P) && sized(Q, P), "pumpParams",
            "c2, c1, c0, Q must have P entries");
    require(!uNominal || sized(*uNominal, T), "pumpParams", "uNominal must have T entries");
    require(areaA > 0, "pumpParams", "tank area must be positive");
    require(hMin <= h0 && h0 <= hMax, "pumpParams", "need hMin <= h0 <= hMax");
    for (int p = 0; p < P; ++p) {
      require(c2[p] > 0, "pumpParams", "c2 must be positive");
      require(Q[p] > 0, "pumpParams", "Q must be positive");
    }
    for (int t = 0; t < T; ++t) {
      require(uMin[t] <= uMax[t], "uBox", "uMin must not exceed uMax");
      require(e[t] > 0, "pumpParams", "prices must be positive");
    }
  }
};

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Tank level h(t) = h0 + (1/A) sum_{s<=t} (sum_p x(p,s) - u(s)) is substituted
/// into the level bounds, giving rows per period (upper, then lower) and a
/// final terminal-level row.
inline ProblemInstance build_instance(const PumpParams& p) {
  p.validate();
  const Eigen::Index P = p.P, T = p.T, n_x = P * T;
  const double inv = 1.0 / p.areaA;

  Matrix H = Matrix::Zero(n_x, n_x);
  Vector c(n_x);
  double d = 0.0;
  for (Eigen::Index q = 0; q < P; ++q)
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto i = q * T + t;
      H(i, i) = 2.0 * p.e[t] * p.c2[q];
      c[i] = p.e[t] * p.c1[q];
      d += p.e[t] * p.c0[q];
    }

  const Eigen::Index rows = 2 * T + 1;
  Matrix A = Matrix::Zero(rows, n_x);
  Vector b0(rows);
  Matrix B = Matrix::Zero(rows, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s <= t; ++s) {
      for (Eigen::Index q = 0; q < P; ++q) {
        A(2 * t, q * T + s) = inv;
        A(2 * t + 1, q * T + s) = -inv;
      }
      B(2 * t, s) = inv;
      B(2 * t + 1, s) = -inv;
    }
    b0[2 * t] = p.hMax - p.h0;
    b0[2 * t + 1] = p.h0 - p.hMin;
  }
  A.row(2 * T) = A.row(2 * T - 1);
  B.row(2 * T) = B.row(2 * T - 1);
  b0[2 * T] = p.h0 - p.hMinT;

  Vector xl = Vector::Zero(n_x), xu(n_x);
  for (Eigen::Index q = 0; q < P; ++q) xu.segment(q * T, T).setConstant(p.Q[q]);

  std::optional<Vector> nominal;
  if (p.uNominal) nominal = to_vector(*p.uNominal);
  return {p.name,
          QuadraticObjective(std::move(H), std::move(c), d),
          ConstraintSystem(std::move(A), std::move(b0), std::move(B)),
          Box(to_vector(p.uMin), to_vector(p.uMax)),
          Box(std::move(xl), std::move(xu)),
          AdjustabilityMask::causal(p.kappa, p.P, p.T),
          p.N,
          std::move(nominal)};
}

inline PumpParams sec41_params() {
  PumpParams p;
  p.name = "sec41";
  p.P = 2;
  p.T = 12;
  p.kappa = 1;
  p.N = 500;
  p.areaA = 2200;
  p.hMin = 4.2;
  p.hMinT = 5;
  p.h0 = 6;
  p.hMax = 10;
  p.e = {0.5, 0.5, 0.3, 0.6, 1.2, 1.1, 1.0, 0.7, 0.6, 0.9, 1.1, 1.2};
  p.uMin = {429.65, 758.83, 918.26, 1377.55, 1616.99, 1071.87,
            1483.87, 2002.045, 1304.35, 1527.15, 1099.80, 655.59};
  p.uMax = {474.87, 855.70, 1099.90, 1683.67, 2057.98, 1392.20,
            1741.94, 2496.93, 1764.71, 1943.65, 1344.20, 754.28};
  p.c2 = {0.000404, 0.0003};
  p.c1 = {-0.07334, -0.06};
  p.c0 = {27.78, 20};
  p.Q = {1800, 1300};
  return p;
}

inline PumpParams sec42_small_params() {
  PumpParams p;
  p.name = "sec42-small";
  p.P = 2;
  p.T = 3;
  p.kappa = 1;
  p.N = 10000;
  p.areaA = 1400;
  p.hMin = 4.5;
  p.hMinT = 5;
  p.h0 = 6.3;
  p.hMax = 6.5;
  p.e = {1, 1.2, 0.8};
  p.uMin = {750.00, 1226.80, 1168.83};
  p.uMax = {1125.00, 2278.35, 1948.05};
  p.c2 = {0.000404, 0.0003};
  p.c1 = {-0.07334, -0.06};
  p.c0 = {27.78, 20};
  p.Q = {1800, 1300};
  p.uNominal = std::vector<double>{900, 1700, 1500};
  return p;
}

inline PumpParams sec42_large_params() {
  PumpParams p;
  p.name = "sec42-large";
  p.P = 1;
  p.T = 7;
  p.kappa = 2;
  p.N = 10000;
  p.areaA = 1400;
  p.hMin = 4.5;
  p.hMinT = 5;
  p.h0 = 5.5;
  p.hMax = 7;
  p.e = {1.0, 1.0, 0.8, 1.0, 1.0, 1.0, 1.0};
  p.uMin = {750.00, 865.98, 1168.83, 979.59, 772.73, 909.09, 734.69};
  p.uMax = {1125.00, 1608.25, 1948.05, 1469.39, 944.44, 1111.11, 1102.04};
  p.c2 = {0.000404};
  p.c1 = {-0.07334};
  p.c0 = {27.78};
  p.Q = {1800};
  p.uNominal = std::vector<double>{900, 1200, 1500, 1200, 850, 1000, 900};
  return p;
}

/// Outer-loop tolerance each shipped instance was published with.
inline double published_epsilon(const std::string& name) {
  if (name == "sec41") return 1e-3;
  if (name == "sec42-small") return 1e-5;
  if (name == "sec42-large") return 1e-6;
  throw std::invalid_argument("no published tolerance for instance '" + name + "'");
}

inline std::vector<PumpParams> builtin_params() {
  return {sec41_params(), sec42_small_params(), sec42_large_params()};
}

inline std::map<std::string, ProblemInstance> builtin_instances() {
  std::map<std::string, ProblemInstance> out;
  for (const auto& p : builtin_params()) out.emplace(p.name, build_instance(p));
  return out;
}

inline ProblemInstance builtin_instance(const std::string& name) {
  for (const auto& p : builtin_params())
    if (p.name == name) return build_instance(p);
  throw std::invalid_argument("unknown built-in instance '" + name + "'");
}

}  // namespace regret_adjust
