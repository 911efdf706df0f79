#pragma once

// Desk-scale experiments: run time against the size of the initial
// discretization, the comparison of the two robust rules on the pump
// instances, and an ex-post cost map over a grid of scenarios.
//
// Benchmark CSV files share one schema:
//   instance,mode,criterion,value,tolerance-met
// where tolerance-met is yes, no, or - when the row has no reference.

#include "regret_adjust/algorithm.hpp"
#include "regret_adjust/pump_model.hpp"

#include <array>
#include <map>
#include <sstream>

namespace regret_adjust {

// ---------------------------------------------------------------------------
// Timing study
// ---------------------------------------------------------------------------

struct TimingRun {
  double fraction = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::string> error;
  SolveStatus status = SolveStatus::IterationBudget;
  StageTimings seconds;
  double totalSeconds = 0.0;
  std::size_t iterations = 0;
  std::size_t initialSize = 0;
  std::size_t finalSize = 0;
  std::size_t infeasibilityAdditions = 0;
  std::size_t stage3Additions = 0;
  double lowerBound = 0.0;
};

/// Means over the repeats of one fraction that did not raise.
struct TimingRow {
  double fraction = 0.0;
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::size_t converged = 0;
  StageTimings seconds;
  double totalSeconds = 0.0;
  double iterations = 0.0;
  double initialSize = 0.0;
  double finalSize = 0.0;
  double infeasibilityAdditions = 0.0;
  double stage3Additions = 0.0;
};

struct TimingStudy {
  std::string instance;
  SolveMode mode = SolveMode::Regret;
  std::vector<TimingRow> rows;
  std::vector<TimingRun> runs;

  const TimingRow& row(double fraction) const {
    for (const auto& r : rows)
      if (r.fraction == fraction) return r;
    throw std::invalid_argument("fraction not in study");
  }
};

struct TimingOptions {
  SolveMode mode = SolveMode::Regret;
  /// Repeats of one fraction run concurrently. Off by default because
  /// concurrent solves share cores and distort the wall times being measured.
  bool parallelRepeats = false;
};

/// Repeat r of every fraction uses seed + r, so fractions are compared on the
/// same random streams.
inline TimingStudy timing_study(const ProblemInstance& instance, const std::vector<double>& fractions,
                                std::size_t repeats, std::uint64_t seed, const AlgoConfig& base,
                                const TimingOptions& options = {}) {
  require(!fractions.empty(), "fractions", "need at least one fraction");
  for (double f : fractions) require(f > 0 && f <= 1, "fractions", "must lie in (0, 1]");
  require(repeats >= 1, "repeats", "must be positive");

  TimingStudy study{instance.name(), options.mode, {}, {}};
  study.runs.resize(fractions.size() * repeats);
  auto run_one = [&](std::size_t job) {
    auto& run = study.runs[job];
    run.fraction = fractions[job / repeats];
    run.seed = seed + job % repeats;
    AlgoConfig cfg = base;
    cfg.initialDiscretization = RandomExtremalFraction{run.fraction, run.seed};
    try {
      auto t0 = std::chrono::steady_clock::now();
      auto rep = solve_adaptive(instance, cfg, options.mode);
      run.totalSeconds = detail::seconds_since(t0);
      run.status = rep.status;
      if (rep.status == SolveStatus::InstanceInfeasible) run.error = rep.message;
      run.seconds = rep.total_timings();
      run.iterations = rep.outer_iterations();
      run.initialSize = rep.additions(AddedBy::Initial);
      run.finalSize = rep.discretizationFinal.size();
      run.infeasibilityAdditions = rep.additions(AddedBy::Infeasibility);
      run.stage3Additions = rep.additions(AddedBy::MaxRegret) + rep.additions(AddedBy::MaxCost);
      run.lowerBound = rep.lowerBound;
    } catch (const std::exception& e) {
      run.error = e.what();
    }
  };
  if (options.parallelRepeats) {
    detail::parallel_for(study.runs.size(), run_one);
  } else {
    for (std::size_t j = 0; j < study.runs.size(); ++j) run_one(j);
  }

  for (std::size_t f = 0; f < fractions.size(); ++f) {
    TimingRow row;
    row.fraction = fractions[f];
    for (std::size_t r = 0; r < repeats; ++r) {
      const auto& run = study.runs[f * repeats + r];
      if (run.error) {
        ++row.failed;
        continue;
      }
      ++row.ok;
      row.converged += run.status == SolveStatus::Converged;
      row.seconds.stage1 += run.seconds.stage1;
      row.seconds.stage2 += run.seconds.stage2;
      row.seconds.stage3 += run.seconds.stage3;
      row.totalSeconds += run.totalSeconds;
      row.iterations += static_cast<double>(run.iterations);
      row.initialSize += static_cast<double>(run.initialSize);
      row.finalSize += static_cast<double>(run.finalSize);
      row.infeasibilityAdditions += static_cast<double>(run.infeasibilityAdditions);
      row.stage3Additions += static_cast<double>(run.stage3Additions);
    }
    if (row.ok) {
      const double k = static_cast<double>(row.ok);
      row.seconds.stage1 /= k;
      row.seconds.stage2 /= k;
      row.seconds.stage3 /= k;
      row.totalSeconds /= k;
      row.iterations /= k;
      row.initialSize /= k;
      row.finalSize /= k;
      row.infeasibilityAdditions /= k;
      row.stage3Additions /= k;
    }
    study.rows.push_back(row);
  }
  return study;
}

/// Trend checks over rows sorted by fraction. Wall times are compared with a
/// noise allowance of 10% of the larger value plus 5 ms.
struct TimingTrends {
  bool stage2TimeNonincreasing = true;
  bool stage2AdditionsNonincreasing = true;
  bool stage1TimeNondecreasing = true;
  std::optional<bool> fullAboveThreePercent;  // unset when either fraction is missing
};

inline TimingTrends timing_trends(const TimingStudy& study) {
  auto rows = study.rows;
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.fraction < b.fraction; });
  auto noise = [](double a, double b) { return 0.1 * std::max(a, b) + 0.005; };
  TimingTrends t;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto &lo = rows[i - 1], &hi = rows[i];
    if (!lo.ok || !hi.ok) continue;
    t.stage2TimeNonincreasing &= hi.seconds.stage2 <= lo.seconds.stage2 + noise(lo.seconds.stage2, hi.seconds.stage2);
    t.stage2AdditionsNonincreasing &= hi.infeasibilityAdditions <= lo.infeasibilityAdditions;
    t.stage1TimeNondecreasing &= hi.seconds.stage1 >= lo.seconds.stage1 - noise(lo.seconds.stage1, hi.seconds.stage1);
  }
  const TimingRow *full = nullptr, *three = nullptr;
  for (const auto& r : rows) {
    if (r.fraction == 1.0 && r.ok) full = &r;
    if (r.fraction == 0.03 && r.ok) three = &r;
  }
  if (full && three) t.fullAboveThreePercent = full->totalSeconds > three->totalSeconds;
  return t;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvRow {
  std::string instance;
  std::string mode;
  std::string criterion;
  double value = 0.0;
  std::optional<bool> met;
};

inline std::string to_csv(const std::vector<CsvRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "instance,mode,criterion,value,tolerance-met\n";
  for (const auto& r : rows)
    os << r.instance << ',' << r.mode << ',' << r.criterion << ',' << r.value << ','
       << (r.met ? (*r.met ? "yes" : "no") : "-") << '\n';
  return os.str();
}

inline std::string fraction_label(double f) {
  std::ostringstream os;
  os << f;
  return os.str();
}

inline std::vector<CsvRow> timing_rows(const TimingStudy& s) {
  std::vector<CsvRow> out;
  const std::string mode = to_string(s.mode);
  for (const auto& r : s.rows) {
    const std::string p = "fraction=" + fraction_label(r.fraction) + "/";
    auto add = [&](const std::string& what, double v) { out.push_back({s.instance, mode, p + what, v, {}}); };
    add("stage1-seconds", r.seconds.stage1);
    add("stage2-seconds", r.seconds.stage2);
    add("stage3-seconds", r.seconds.stage3);
    add("total-seconds", r.totalSeconds);
    add("iterations", r.iterations);
    add("initial-scenarios", r.initialSize);
    add("final-scenarios", r.finalSize);
    add("infeasibility-additions", r.infeasibilityAdditions);
    add("stage3-additions", r.stage3Additions);
    add("converged-repeats", static_cast<double>(r.converged));
    out.push_back({s.instance, mode, p + "failed-repeats", static_cast<double>(r.failed), r.failed == 0});
  }
  auto t = timing_trends(s);
  auto trend = [&](const std::string& what, bool ok) { out.push_back({s.instance, mode, "trend/" + what, ok ? 1.0 : 0.0, ok}); };
  trend("stage2-seconds-nonincreasing", t.stage2TimeNonincreasing);
  trend("stage2-additions-nonincreasing", t.stage2AdditionsNonincreasing);
  trend("stage1-seconds-nondecreasing", t.stage1TimeNondecreasing);
  if (t.fullAboveThreePercent) trend("total-full-above-3pct", *t.fullAboveThreePercent);
  return out;
}

// ---------------------------------------------------------------------------
// Rule comparison on the pump instances
// ---------------------------------------------------------------------------

/// Ex-post quality of one rule: largest cost over the box, cost at the
/// nominal scenario and largest regret over the box.
struct RuleScores {
  double worstCase = 0.0;
  double nominal = 0.0;
  double maxRegret = 0.0;
  bool regretCertified = false;
};

inline RuleScores score_rule(const ProblemInstance& instance, const DecisionRule& rule, double epsBnb) {
  RuleScores s;
  s.worstCase = max_cost(instance, rule).cost;
  s.nominal = nominal_cost(instance, rule);
  BnbOptions opt;
  opt.epsBnb = epsBnb;
  auto r = max_regret_global(instance, rule, opt);
  s.maxRegret = r.regretValue;
  s.regretCertified = r.converged;
  return s;
}

/// Published values, indexed by [mode][criterion] with criteria ordered
/// worst-case cost, nominal cost, maximal regret.
struct ReferenceTable {
  std::string instance;
  std::array<std::array<double, 3>, 2> value;  // [0] regret rule, [1] worst-case rule
};

inline std::vector<ReferenceTable> published_tables() {
  return {{"sec42-small", {{{616.9629, 430.8811, 227.2854}, {616.962, 433.1376, 249.2559}}}},
          {"sec42-large", {{{3717.1894, 2581.0971, 496.0199}, {3708.5053, 2752.0929, 837.8284}}}}};
}

inline constexpr std::array<const char*, 3> kCriteria{"worst-case-cost", "nominal-cost", "max-regret"};

struct ComparisonEntry {
  std::string instance;
  SolveMode mode = SolveMode::Regret;
  SolveStatus status = SolveStatus::IterationBudget;
  RuleScores scores;
  DecisionRule rule;
  double seconds = 0.0;
};

/// Solves both modes on each named instance at its published tolerance and
/// scores the two rules on all three criteria.
inline std::vector<ComparisonEntry> compare_rules(const std::vector<std::string>& names, AlgoConfig base = {}) {
  std::vector<ComparisonEntry> out;
  for (const auto& name : names) {
    auto inst = builtin_instance(name);
    AlgoConfig cfg = base;
    cfg.epsilon = published_epsilon(name);
    for (auto mode : {SolveMode::Regret, SolveMode::WorstCase}) {
      ComparisonEntry e{name, mode};
      auto t0 = std::chrono::steady_clock::now();
      auto rep = solve_adaptive(inst, cfg, mode);
      e.status = rep.status;
      e.rule = rep.rule;
      e.scores = score_rule(inst, rep.rule, rep.effectiveEpsilon / 10.0);
      e.seconds = detail::seconds_since(t0);
      out.push_back(std::move(e));
    }
  }
  return out;
}

inline double score(const RuleScores& s, std::size_t criterion) {
  return criterion == 0 ? s.worstCase : criterion == 1 ? s.nominal : s.maxRegret;
}

/// Rows per (instance, mode, criterion) with the 1% check against the
/// published value, then one `best/<criterion>` row per instance naming the
/// better mode; its tolerance-met says whether the published table agrees.
inline std::vector<CsvRow> comparison_rows(const std::vector<ComparisonEntry>& entries, double rel_tol = 0.01) {
  std::vector<CsvRow> out;
  auto tables = published_tables();
  auto reference = [&](const std::string& name) -> const ReferenceTable* {
    for (const auto& t : tables)
      if (t.instance == name) return &t;
    return nullptr;
  };
  for (const auto& e : entries) {
    const auto* ref = reference(e.instance);
    const std::size_t m = e.mode == SolveMode::Regret ? 0 : 1;
    for (std::size_t c = 0; c < 3; ++c) {
      double v = score(e.scores, c);
      std::optional<bool> met;
      if (ref) met = std::abs(v - ref->value[m][c]) <= rel_tol * std::abs(ref->value[m][c]);
      out.push_back({e.instance, to_string(e.mode), kCriteria[c], v, met});
    }
  }
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    const auto& a = entries[i];
    const auto& b = entries[i + 1];
    if (a.instance != b.instance || a.mode != SolveMode::Regret || b.mode != SolveMode::WorstCase) continue;
    const auto* ref = reference(a.instance);
    for (std::size_t c = 0; c < 3; ++c) {
      const bool regret_best = score(a.scores, c) < score(b.scores, c);
      std::optional<bool> met;
      if (ref) met = regret_best == (ref->value[0][c] < ref->value[1][c]);
      const double lo = std::min(score(a.scores, c), score(b.scores, c));
      const double gap = (std::max(score(a.scores, c), score(b.scores, c)) - lo) / std::max(1.0, std::abs(lo));
      out.push_back({a.instance, regret_best ? "regret" : "worstcase", std::string("best/") + kCriteria[c], gap, met});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ex-post cost map
// ---------------------------------------------------------------------------

enum class Winner { A, B, Tie };

inline const char* to_string(Winner w) { return w == Winner::A ? "A" : w == Winner::B ? "B" : "tie"; }

struct RegionCell {
  Vector u;
  double costA = 0.0;
  double costB = 0.0;
  Winner winner = Winner::Tie;
};

/// Costs within this relative distance count as a tie.
inline constexpr double kTieTolerance = 1e-9;

inline Winner compare_costs(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  if (std::abs(a - b) <= kTieTolerance * scale) return Winner::Tie;
  return a < b ? Winner::A : Winner::B;
}

/// gridRes x gridRes cells over the first two uncertain coordinates, cell
/// centres at evenly spaced points including both bounds; the remaining
/// coordinates sit at the nominal scenario. Row-major with the first
/// coordinate varying slowest.
inline std::vector<RegionCell> region_comparison(const ProblemInstance& instance, const DecisionRule& a,
                                                 const DecisionRule& b, std::size_t gridRes = 20) {
  if (instance.n_u() < 2) throw std::invalid_argument("region comparison needs at least two uncertain coordinates");
  if (gridRes < 2) throw std::invalid_argument("grid resolution must be at least 2");
  instance.check_rule(a);
  instance.check_rule(b);
  Vector base = instance.u_box().center();
  if (instance.n_u() > 2) {
    if (!instance.nominal())
      throw std::invalid_argument("instance '" + instance.name() +
                                  "' has no nominal scenario to fix the remaining coordinates");
    base = *instance.nominal();
  }
  const auto& lo = instance.u_box().lower();
  const auto& hi = instance.u_box().upper();
  std::vector<RegionCell> cells;
  cells.reserve(gridRes * gridRes);
  const double steps = static_cast<double>(gridRes - 1);
  for (std::size_t i = 0; i < gridRes; ++i)
    for (std::size_t j = 0; j < gridRes; ++j) {
      RegionCell cell;
      cell.u = base;
      cell.u[0] = lo[0] + (hi[0] - lo[0]) * static_cast<double>(i) / steps;
      cell.u[1] = lo[1] + (hi[1] - lo[1]) * static_cast<double>(j) / steps;
      cell.costA = evaluate_objective(a, instance, cell.u);
      cell.costB = evaluate_objective(b, instance, cell.u);
      cell.winner = compare_costs(cell.costA, cell.costB);
      cells.push_back(std::move(cell));
    }
  return cells;
}

/// One line per cell: u1,u2,costA,costB,winner.
inline std::string region_csv(const std::vector<RegionCell>& cells) {
  std::ostringstream os;
  os.precision(17);
  os << "u1,u2,costA,costB,winner\n";
  for (const auto& c : cells)
    os << c.u[0] << ',' << c.u[1] << ',' << c.costA << ',' << c.costB << ',' << to_string(c.winner) << '\n';
  return os.str();
}

}  // namespace regret_adjust
