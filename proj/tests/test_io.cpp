#include "regret_adjust/io.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace regret_adjust;

namespace {

std::string shipped_path(const std::string& name) { return std::string(REGRET_ADJUST_DATA_DIR) + "/" + name + ".inst"; }

ProblemInstance tiny_instance() {
  Matrix H(2, 2);
  H << 2, 0.5, 0.5, 1;
  Matrix A(1, 2), B(1, 1);
  A << 1, 1;
  B << 1;
  Vector inf = Vector::Constant(2, std::numeric_limits<double>::infinity());
  return {"tiny",
          {H, Vector::Constant(2, -1.0), 0.1},
          {A, Vector::Constant(1, 3.0), B},
          Box(Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)),
          Box(-inf, inf),
          AdjustabilityMask::full(2, 1),
          5.0};
}

template <class F>
void expect_invariant(F&& f, const std::string& field) {
  try {
    f();
    ADD_FAILURE() << "no error raised";
  } catch (const InvariantError& e) {
    EXPECT_EQ(e.field(), field) << e.what();
  } catch (const std::exception& e) {
    ADD_FAILURE() << "wrong error type: " << e.what();
  }
}

FormatError format_error(const std::string& src) {
  try {
    parse_instance(src);
  } catch (const FormatError& e) {
    return e;
  }
  ADD_FAILURE() << "no format error for:\n" << src;
  return FormatError(0, 0, "");
}

std::string replace_line(std::string s, const std::string& from, const std::string& to) {
  auto at = s.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return s.replace(at, from.size(), to);
}

}  // namespace

TEST(InstanceFormat, ShippedFilesMatchBuiltins) {
  for (const auto& [name, inst] : builtin_instances()) {
    std::string src = text::read_file(shipped_path(name));
    auto doc = parse_instance_document(src);
    EXPECT_TRUE(doc.instance == inst) << name;
    ASSERT_TRUE(doc.pump.has_value()) << name;
    EXPECT_EQ(doc.pump->name, name);
    EXPECT_EQ(src, dump_builtin(name)) << name;
    EXPECT_EQ(serialize_instance(doc), src) << name;
  }
}

TEST(InstanceFormat, EmptyDocumentIsSyntaxError) {
  for (std::string src : {"", "   \n\n", "# only a comment\n"}) {
    auto e = format_error(src);
    EXPECT_NE(std::string(e.what()).find("empty document"), std::string::npos) << e.what();
  }
  EXPECT_EQ(format_error("").line(), 1);
  EXPECT_EQ(format_error("").column(), 1);
}

TEST(InstanceFormat, LowerAboveUpperNamesUBox) {
  std::string src = dump_builtin("sec42-small");
  src = replace_line(src, "uBox {\n  lower [750 ", "uBox {\n  lower [1750 ");
  expect_invariant([&] { parse_instance(src); }, "uBox");
}

TEST(InstanceFormat, SyntaxErrorsCarryLineAndColumn) {
  auto e = format_error("metadata {\n  name \"x\"\n  n_x [1 2\n");
  EXPECT_EQ(e.line(), 3);
  EXPECT_EQ(e.column(), 7);

  e = format_error("metadata {\n  name \"x\n}\n");
  EXPECT_EQ(e.line(), 2);
  EXPECT_EQ(e.column(), 8);

  e = format_error("N 1.2.3\n");
  EXPECT_EQ(e.line(), 1);
  EXPECT_EQ(e.column(), 3);

  e = format_error("N nan\n");
  EXPECT_EQ(e.column(), 3);

  e = format_error("\n  = 4\n");
  EXPECT_EQ(e.line(), 2);
  EXPECT_EQ(e.column(), 3);
}

TEST(InstanceFormat, StructuralErrors) {
  std::string src = serialize_instance(tiny_instance());
  auto unknown = format_error(src + "colour 3\n");
  EXPECT_NE(std::string(unknown.what()).find("unknown key 'colour'"), std::string::npos);
  auto dup = format_error(src + "N 4\n");
  EXPECT_NE(std::string(dup.what()).find("duplicate key 'N'"), std::string::npos);
  auto missing = format_error(replace_line(src, "N 5\n", ""));
  EXPECT_NE(std::string(missing.what()).find("missing key 'N'"), std::string::npos);
  auto kind = format_error(replace_line(src, "N 5", "N [5]"));
  EXPECT_NE(std::string(kind.what()).find("expected number"), std::string::npos);
}

TEST(InstanceFormat, InvariantErrorsNameTheField) {
  std::string src = serialize_instance(tiny_instance());
  expect_invariant([&] { parse_instance(replace_line(src, "c [-1 -1]", "c [-1]")); }, "objective");
  expect_invariant([&] { parse_instance(replace_line(src, "b0 [3]", "b0 [3 4]")); }, "constraints");
  expect_invariant([&] { parse_instance(replace_line(src, "N 5", "N -5")); }, "N");
  expect_invariant([&] { parse_instance(replace_line(src, "lower [-inf -inf]\n  upper [inf inf]", "lower [2 -inf]\n  upper [1 inf]")); },
                   "xBox");
  expect_invariant([&] { parse_instance(src + "nominal [2]\n"); }, "nominal");
  expect_invariant([&] { parse_instance(replace_line(src, "mask [\n  [1]\n  [1]\n]", "mask causal(1, 1, 2)")); }, "mask");
  expect_invariant([&] { parse_instance(replace_line(src, "mask [\n  [1]\n  [1]\n]", "mask [\n  [1]\n  [2]\n]")); },
                   "mask");
}

TEST(InstanceFormat, PumpBlockMustMatchExplicitData) {
  std::string src = dump_builtin("sec42-small");
  expect_invariant([&] { parse_instance(replace_line(src, "  d ", "  d 1")); }, "objective");
  expect_invariant([&] { parse_instance(replace_line(src, "N 10000\n", "N 9999\n")); }, "N");
  expect_invariant([&] { parse_instance(replace_line(src, "  kappa 1\n", "  kappa 2\n")); }, "mask");
  expect_invariant([&] { parse_instance(replace_line(src, "  uMax [1125 ", "  uMax [1126 ")); }, "uBox");
}

TEST(InstanceFormat, ShorthandsAndExplicitFormsAgree) {
  auto inst = builtin_instance("sec42-small");
  std::string src = serialize_instance(inst);
  EXPECT_NE(src.find("H diagonal ["), std::string::npos);
  EXPECT_NE(src.find("mask causal(1, 2, 3)"), std::string::npos);

  std::string explicit_src = src;
  Matrix m(6, 3);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) m(i, j) = inst.mask().allows(i, j);
  explicit_src = replace_line(explicit_src, "mask causal(1, 2, 3)", "mask " + text::matrix(m, ""));
  std::string h = "H " + text::matrix(inst.objective().H, "  ");
  auto from = explicit_src.find("H diagonal");
  explicit_src.replace(from, explicit_src.find('\n', from) - from, h);
  EXPECT_TRUE(parse_instance(explicit_src) == inst);
  EXPECT_EQ(serialize_instance(parse_instance(explicit_src)), src);
}

TEST(InstanceFormat, RandomInstancesRoundTrip) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 20; ++t) {
    auto inst = testing_oracles::random_instance(rng, 1 + t % 4, 1 + t % 3, t % 4, true);
    std::string s1 = serialize_instance(inst);
    auto back = parse_instance(s1);
    EXPECT_TRUE(back == inst) << s1;
    EXPECT_EQ(serialize_instance(back), s1);
  }
}

TEST(InstanceFormat, NumbersRoundTripExactly) {
  const double values[] = {0.1,   1.0 / 3.0, -2.5e-300, 4.9e-324, 1.7976931348623157e308, -0.0, 123456789.125,
                           1e-7, 6.02214076e23};
  for (double x : values) {
    std::string src = "N " + text::num(x);
    auto entries = text::parse(src);
    ASSERT_EQ(entries.size(), 1u);
    double y = entries[0].second.number;
    EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0) << src;
  }
  auto entries = text::parse("a inf b -inf c +2 d 1E3");
  EXPECT_EQ(entries[0].second.number, std::numeric_limits<double>::infinity());
  EXPECT_EQ(entries[1].second.number, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(entries[2].second.number, 2.0);
  EXPECT_EQ(entries[3].second.number, 1000.0);
}

TEST(InstanceFormat, QuotedNamesRoundTrip) {
  auto inst = tiny_instance();
  ProblemInstance named("odd \"name\" \\ here", inst.objective(), inst.general_constraints(), inst.u_box(),
                        inst.x_box(), inst.mask(), inst.N());
  EXPECT_EQ(parse_instance(serialize_instance(named)).name(), named.name());
}

TEST(RuleFormat, RoundTrip) {
  Matrix Pi(2, 3);
  Pi << 1, 0, -0.25, 1e-17, 3, 0;
  DecisionRule r(Vector::LinSpaced(2, -1, 1), Pi, 10.0);
  std::string s = serialize_rule(r);
  EXPECT_TRUE(parse_rule(s) == r);
  EXPECT_EQ(serialize_rule(parse_rule(s)), s);
  EXPECT_THROW(parse_rule("rule { n_x 2 n_u 1 N 1 pi0 [1] Pi [[1] [1]] }"), InvariantError);
  EXPECT_THROW(parse_rule("rule { n_x 1 n_u 1 N 1 pi0 [1] Pi [[1]] extra 2 }"), FormatError);
}

TEST(ScenarioFormat, RoundTripAndShapeCheck) {
  std::vector<Vector> sc{Vector::Constant(2, 0.5), Vector::LinSpaced(2, 1, 2)};
  auto back = parse_scenarios(serialize_scenarios(sc), 2);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], sc[0]);
  EXPECT_EQ(back[1], sc[1]);
  EXPECT_THROW(parse_scenarios(serialize_scenarios(sc), 3), InvariantError);
}

TEST(ReportFormat, RoundTripAndReverify) {
  std::mt19937_64 rng(11);
  auto inst = testing_oracles::random_instance(rng, 3, 2, 3);
  AlgoConfig cfg;
  cfg.initialDiscretization = RandomExtremalFraction{0.5, 4};
  for (auto mode : {SolveMode::Regret, SolveMode::WorstCase}) {
    auto rep = solve_adaptive(inst, cfg, mode);
    ASSERT_EQ(rep.status, SolveStatus::Converged);
    std::string s = serialize_report(rep, inst.name());
    auto doc = parse_report(s);
    EXPECT_EQ(doc.instance, inst.name());
    EXPECT_EQ(serialize_report(doc.report, doc.instance), s);
    const auto& r = doc.report;
    EXPECT_EQ(r.mode, mode);
    EXPECT_TRUE(r.rule == rep.rule);
    EXPECT_EQ(r.history.size(), rep.history.size());
    EXPECT_EQ(r.discretizationFinal.size(), rep.discretizationFinal.size());
    EXPECT_EQ(r.seed, rep.seed);
    EXPECT_EQ(r.lowerBound, rep.lowerBound);

    auto cert = certify(inst, r.rule, r.mode, r.effectiveEpsilon / 10, r.lowerBound + r.effectiveEpsilon);
    EXPECT_LE(cert.violation, cfg.tolFeas);
    EXPECT_TRUE(cert.certified);
    EXPECT_LT(cert.value - r.lowerBound, r.effectiveEpsilon);
  }
}

TEST(ReportFormat, RejectsUnknownEnumValues) {
  std::mt19937_64 rng(2);
  auto inst = testing_oracles::random_instance(rng, 2, 1, 1);
  auto rep = solve_adaptive(inst, AlgoConfig{}, SolveMode::Regret);
  std::string s = serialize_report(rep, inst.name());
  auto at = s.find("mode regret");
  ASSERT_NE(at, std::string::npos);
  s.replace(at, 11, "mode sideways");
  EXPECT_THROW(parse_report(s), FormatError);
}
