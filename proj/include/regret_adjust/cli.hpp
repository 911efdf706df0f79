#pragma once

// Command-line front end. Exit codes: 0 converged or success, 2 iteration
// budget reached, 1 any error (including bad usage).

#include "regret_adjust/bench.hpp"
#include "regret_adjust/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <ostream>

namespace regret_adjust {

namespace cli_detail {

struct Loaded {
  ProblemInstance instance;
  bool builtin = false;
};

/// A path to an instance file, or the name of a shipped instance.
inline Loaded load_instance(const std::string& ref) {
  if (std::filesystem::is_regular_file(ref)) return {parse_instance(text::read_file(ref)), false};
  for (const auto& p : builtin_params())
    if (p.name == ref) return {build_instance(p), true};
  throw std::invalid_argument("'" + ref + "' is neither a file nor a shipped instance");
}

/// Accepts a rule file or a report file (whose rule is taken).
inline DecisionRule load_rule(const std::string& path) {
  std::string src = text::read_file(path);
  for (const auto& [key, value] : text::parse(src))
    if (key == "report") return parse_report(src).report.rule;
  return parse_rule(src);
}

inline InitialDiscretization parse_init(const std::string& spec, const ProblemInstance& inst) {
  if (spec == "nominal") return NominalOnly{};
  if (spec.rfind("fraction:", 0) == 0) {
    auto rest = spec.substr(9);
    auto colon = rest.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("--init fraction:F:SEED needs a seed");
    std::size_t used = 0;
    double f = std::stod(rest.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("bad fraction in --init");
    std::string seed_text = rest.substr(colon + 1);
    if (seed_text.empty() || seed_text.find_first_not_of("0123456789") != std::string::npos)
      throw std::invalid_argument("bad seed in --init");
    return RandomExtremalFraction{f, std::stoull(seed_text)};
  }
  if (spec.rfind("file:", 0) == 0) return GivenScenarios{parse_scenarios(text::read_file(spec.substr(5)), inst.n_u())};
  throw std::invalid_argument("--init must be nominal, fraction:F:SEED or file:PATH");
}

inline SolveMode parse_mode(const std::string& m) {
  if (m == "regret") return SolveMode::Regret;
  if (m == "worstcase") return SolveMode::WorstCase;
  throw std::invalid_argument("--mode must be regret or worstcase");
}

/// RES evenly spaced points per nondegenerate coordinate, bounds included.
inline std::vector<Vector> grid_scenarios(const Box& box, std::size_t res) {
  if (res < 2) throw std::invalid_argument("grid resolution must be at least 2");
  auto dims = box.nondegenerate_dims();
  double count = std::pow(static_cast<double>(res), static_cast<double>(dims.size()));
  if (count > 1e6) throw std::invalid_argument("grid would have more than 10^6 points");
  std::vector<Vector> out;
  std::vector<std::size_t> idx(dims.size(), 0);
  for (;;) {
    Vector u = box.lower();
    for (std::size_t k = 0; k < dims.size(); ++k) {
      auto d = dims[k];
      u[d] = box.lower()[d] + (box.upper()[d] - box.lower()[d]) * static_cast<double>(idx[k]) / static_cast<double>(res - 1);
    }
    out.push_back(u);
    std::size_t k = 0;
    while (k < dims.size() && ++idx[k] == res) idx[k++] = 0;
    if (k == dims.size()) break;
  }
  return out;
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "' in list");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

inline int exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return 0;
    case SolveStatus::IterationBudget: return 2;
    case SolveStatus::InstanceInfeasible: return 1;
  }
  return 1;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace cli_detail

/// args excludes the program name.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"Affinely adjustable robust optimization with min-max regret", "regret-adjust"};
  app.require_subcommand(1);

  std::string instance_ref, mode = "regret", init, report_path, rule_out, rule_path, scenarios, csv_path, regions_path;
  std::string fractions = "0.01,0.03,0.1,1";
  double epsilon = 1e-5;
  std::size_t max_iter = 500, bnb_nodes = 100000, repeats = 3;
  std::uint64_t seed = 1;

  auto* solve = app.add_subcommand("solve", "Run the adaptive discretization loop");
  solve->add_option("instance", instance_ref, "Instance file or shipped instance name")->required();
  solve->add_option("--mode", mode, "regret or worstcase")->check(CLI::IsMember({"regret", "worstcase"}));
  solve->add_option("--epsilon", epsilon, "Termination tolerance (relative to max(1, |lower bound|))");
  solve->add_option("--init", init, "nominal, fraction:F:SEED or file:PATH");
  solve->add_option("--report", report_path, "Write the full report here");
  solve->add_option("--rule", rule_out, "Write the returned rule here");
  solve->add_option("--max-iterations", max_iter, "Outer iteration budget");
  solve->add_option("--bnb-nodes", bnb_nodes, "Node budget of each max-regret search");

  auto* evaluate = app.add_subcommand("evaluate", "Ex-post cost, regret and violation of a rule");
  evaluate->add_option("instance", instance_ref, "Instance file or shipped instance name")->required();
  evaluate->add_option("rule", rule_path, "Rule file or report file")->required();
  evaluate->add_option("--scenarios", scenarios, "Scenario file or grid:RES")->required();
  evaluate->add_option("--csv", csv_path, "Write per-scenario rows here instead of stdout");

  auto* verify = app.add_subcommand("verify", "Re-check the termination certificate of a saved report");
  verify->add_option("instance", instance_ref, "Instance file or shipped instance name")->required();
  verify->add_option("report", rule_path, "Report file")->required();

  auto* bench = app.add_subcommand("bench", "Benchmarks");
  bench->require_subcommand(1);
  auto* timing = bench->add_subcommand("timing", "Run time against initial discretization size");
  timing->add_option("instance", instance_ref, "Instance file or shipped instance name")->required();
  timing->add_option("--fractions", fractions, "Comma-separated fractions of box vertices");
  timing->add_option("--repeats", repeats, "Repeats per fraction")->check(CLI::PositiveNumber);
  timing->add_option("--seed", seed, "Seed of the first repeat");
  timing->add_option("--csv", csv_path, "Output CSV")->required();
  timing->add_option("--mode", mode, "regret or worstcase")->check(CLI::IsMember({"regret", "worstcase"}));
  timing->add_option("--epsilon", epsilon, "Termination tolerance");
  timing->add_option("--max-iterations", max_iter, "Outer iteration budget per solve");
  timing->add_option("--bnb-nodes", bnb_nodes, "Node budget of each max-regret search");
  auto* tables = bench->add_subcommand("tables", "Compare both rules on the sec42 instances");
  tables->add_option("--csv", csv_path, "Output CSV")->required();
  tables->add_option("--regions", regions_path, "Also write the 20x20 ex-post cost map of sec42-small here");

  auto* instances = app.add_subcommand("instances", "Shipped instances");
  instances->require_subcommand(1);
  auto* list = instances->add_subcommand("list", "Names of shipped instances");
  auto* dump = instances->add_subcommand("dump", "Print a shipped instance file");
  dump->add_option("name", instance_ref, "Instance name")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 1;
  }

  try {
    AlgoConfig cfg;
    cfg.epsilon = epsilon;
    cfg.maxOuterIterations = max_iter;
    cfg.bnbMaxNodes = bnb_nodes;

    if (*solve) {
      auto loaded = load_instance(instance_ref);
      const auto& inst = loaded.instance;
      if (!init.empty()) cfg.initialDiscretization = parse_init(init, inst);
      cfg.validate();
      auto rep = solve_adaptive(inst, cfg, parse_mode(mode));
      auto t = rep.total_timings();
      out << "instance " << inst.name() << "\nmode " << to_string(rep.mode) << "\nstatus " << to_string(rep.status)
          << "\nlower-bound " << fmt(rep.lowerBound) << "\nupper-bound " << fmt(rep.upperBound) << "\niterations "
          << rep.outer_iterations() << "\nscenarios " << rep.discretizationFinal.size() << "\nstage-seconds "
          << fmt(t.stage1) << ' ' << fmt(t.stage2) << ' ' << fmt(t.stage3) << '\n';
      if (inst.nominal() && rep.status != SolveStatus::InstanceInfeasible)
        out << "nominal-cost " << fmt(nominal_cost(inst, rep.rule)) << '\n';
      if (!rep.message.empty()) out << "message " << rep.message << '\n';
      if (!report_path.empty()) text::write_file(report_path, serialize_report(rep, inst.name()));
      if (!rule_out.empty()) text::write_file(rule_out, serialize_rule(rep.rule));
      return exit_code(rep.status);
    }

    if (*evaluate) {
      auto inst = load_instance(instance_ref).instance;
      auto rule = load_rule(rule_path);
      inst.check_rule(rule);
      std::vector<Vector> us = scenarios.rfind("grid:", 0) == 0
                                   ? grid_scenarios(inst.u_box(), std::stoul(scenarios.substr(5)))
                                   : parse_scenarios(text::read_file(scenarios), inst.n_u());
      auto evals = evaluate_rule(inst, rule, us);
      std::ostringstream os;
      os.precision(17);
      os << "index";
      for (Eigen::Index k = 0; k < inst.n_u(); ++k) os << ",u" << k + 1;
      os << ",cost,regret,violation\n";
      double worst_regret = -std::numeric_limits<double>::infinity(), worst_cost = worst_regret, worst_viol = worst_regret;
      for (std::size_t i = 0; i < evals.size(); ++i) {
        const auto& e = evals[i];
        os << i;
        for (Eigen::Index k = 0; k < e.u.size(); ++k) os << ',' << e.u[k];
        os << ',' << e.cost << ',' << e.regret << ',' << e.violation << '\n';
        worst_regret = std::max(worst_regret, e.regret);
        worst_cost = std::max(worst_cost, e.cost);
        worst_viol = std::max(worst_viol, e.violation);
      }
      if (csv_path.empty())
        out << os.str();
      else
        text::write_file(csv_path, os.str());
      out << "scenarios " << evals.size() << "\nmax-cost " << fmt(worst_cost) << "\nmax-regret " << fmt(worst_regret)
          << "\nmax-violation " << fmt(worst_viol) << '\n';
      return 0;
    }

    if (*verify) {
      auto inst = load_instance(instance_ref).instance;
      auto doc = parse_report(text::read_file(rule_path));
      const auto& rep = doc.report;
      inst.check_rule(rep.rule);
      if (doc.instance != inst.name())
        err << "warning: report was written for instance '" << doc.instance << "'\n";
      auto cert = certify(inst, rep.rule, rep.mode, rep.effectiveEpsilon / 10.0, rep.lowerBound + rep.effectiveEpsilon);
      const bool feasible = cert.violation <= cfg.tolFeas;
      const bool within = cert.value - rep.lowerBound < rep.effectiveEpsilon;
      out << "status " << to_string(rep.status) << "\nviolation " << fmt(cert.violation) << "\nvalue " << fmt(cert.value)
          << "\nlower-bound " << fmt(rep.lowerBound) << "\nsearch-complete " << (cert.certified ? "yes" : "no")
          << "\ncertificate " << (feasible && within && cert.certified ? "passed" : "failed") << '\n';
      if (rep.status != SolveStatus::Converged) return exit_code(rep.status);
      return feasible && within && cert.certified ? 0 : 1;
    }

    if (*timing) {
      auto inst = load_instance(instance_ref).instance;
      TimingOptions opt;
      opt.mode = parse_mode(mode);
      auto study = timing_study(inst, parse_list(fractions), repeats, seed, cfg, opt);
      text::write_file(csv_path, to_csv(timing_rows(study)));
      for (const auto& r : study.rows)
        out << "fraction " << fraction_label(r.fraction) << " ok " << r.ok << " failed " << r.failed << " total-s "
            << fmt(r.totalSeconds) << " iterations " << fmt(r.iterations) << '\n';
      for (const auto& run : study.runs)
        if (run.error) err << "fraction " << fraction_label(run.fraction) << " seed " << run.seed << ": " << *run.error << '\n';
      return 0;
    }

    if (*tables) {
      auto entries = compare_rules({"sec42-small", "sec42-large"});
      auto rows = comparison_rows(entries);
      auto small = builtin_instance("sec42-small");
      auto cells = region_comparison(small, entries[0].rule, entries[1].rule, 20);
      std::size_t regret_wins = 0, worst_wins = 0;
      for (const auto& c : cells) {
        regret_wins += c.winner == Winner::A;
        worst_wins += c.winner == Winner::B;
      }
      rows.push_back({"sec42-small", "regret", "region-cells-cheaper", static_cast<double>(regret_wins), regret_wins > 0});
      rows.push_back({"sec42-small", "worstcase", "region-cells-cheaper", static_cast<double>(worst_wins), worst_wins > 0});
      text::write_file(csv_path, to_csv(rows));
      if (!regions_path.empty()) text::write_file(regions_path, region_csv(cells));
      for (const auto& r : rows)
        out << r.instance << ' ' << r.mode << ' ' << r.criterion << ' ' << fmt(r.value) << ' '
            << (r.met ? (*r.met ? "yes" : "no") : "-") << '\n';
      return 0;
    }

    if (*list) {
      for (const auto& p : builtin_params()) out << p.name << '\n';
      return 0;
    }
    if (*dump) {
      out << dump_builtin(instance_ref);
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 1;
}

}  // namespace regret_adjust
