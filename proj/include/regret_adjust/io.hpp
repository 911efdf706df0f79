#pragma once

// Text formats for instances, rules, scenario lists and solve reports.
//
// A document is a sequence of `key value` entries. Values are numbers,
// quoted strings, bare words, lists in square brackets, blocks in braces, or
// a word tagged with a list or a parenthesised argument list
// (`diagonal [1 2]`, `causal(1, 2, 3)`). `#` starts a comment. Numbers are
// written with the shortest decimal form that reads back to the same double.
// docs/formats.md has the grammar.

#include "regret_adjust/algorithm.hpp"
#include "regret_adjust/pump_model.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>
#include <string_view>

namespace regret_adjust {

/// Malformed text; line and column are 1-based.
class FormatError : public std::runtime_error {
 public:
  FormatError(int line, int column, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

namespace text {

struct Pos {
  int line = 1;
  int column = 1;
};

struct Value;
using Entries = std::vector<std::pair<std::string, Value>>;

struct Value {
  enum class Kind { Number, String, Word, List, Block, Tagged };
  Kind kind = Kind::Number;
  Pos pos;
  double number = 0.0;
  std::string text;  // string contents, word, or tag
  std::vector<Value> items;  // list items or tagged arguments
  Entries entries;           // block contents
};

inline const char* kind_name(Value::Kind k) {
  switch (k) {
    case Value::Kind::Number: return "number";
    case Value::Kind::String: return "string";
    case Value::Kind::Word: return "word";
    case Value::Kind::List: return "list";
    case Value::Kind::Block: return "block";
    case Value::Kind::Tagged: return "tagged value";
  }
  return "?";
}

[[noreturn]] inline void fail(Pos p, const std::string& what) { throw FormatError(p.line, p.column, what); }

class Parser {
 public:
  explicit Parser(std::string_view src) : s_(src) {}

  Entries document() {
    skip();
    if (i_ >= s_.size()) fail(pos_, "empty document");
    Entries out;
    while (i_ < s_.size()) {
      out.push_back(entry());
      skip();
    }
    return out;
  }

 private:
  static bool word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '+';
  }

  void advance() {
    if (s_[i_] == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else {
      ++pos_.column;
    }
    ++i_;
  }

  void skip() {
    while (i_ < s_.size()) {
      char c = s_[i_];
      if (c == '#') {
        while (i_ < s_.size() && s_[i_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ',') {
        advance();
      } else {
        break;
      }
    }
  }

  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }

  std::string word() {
    Pos p = pos_;
    std::size_t start = i_;
    while (i_ < s_.size() && word_char(s_[i_])) advance();
    if (i_ == start) {
      if (i_ >= s_.size()) fail(p, "unexpected end of input");
      fail(p, std::string("unexpected character '") + s_[i_] + "'");
    }
    return std::string(s_.substr(start, i_ - start));
  }

  std::pair<std::string, Value> entry() {
    skip();
    Pos p = pos_;
    if (!std::isalpha(static_cast<unsigned char>(peek()))) {
      if (i_ >= s_.size()) fail(p, "expected a key before end of input");
      fail(p, std::string("expected a key, found '") + peek() + "'");
    }
    std::string key = word();
    skip();
    if (i_ >= s_.size() || peek() == '}') fail(pos_, "missing value for '" + key + "'");
    return {key, value()};
  }

  Value value() {
    skip();
    Value v;
    v.pos = pos_;
    char c = peek();
    if (c == '[') {
      advance();
      v.kind = Value::Kind::List;
      for (;;) {
        skip();
        if (i_ >= s_.size()) fail(v.pos, "unterminated list");
        if (peek() == ']') break;
        v.items.push_back(value());
      }
      advance();
    } else if (c == '{') {
      advance();
      v.kind = Value::Kind::Block;
      for (;;) {
        skip();
        if (i_ >= s_.size()) fail(v.pos, "unterminated block");
        if (peek() == '}') break;
        v.entries.push_back(entry());
      }
      advance();
    } else if (c == '"') {
      advance();
      v.kind = Value::Kind::String;
      for (;;) {
        if (i_ >= s_.size() || peek() == '\n') fail(v.pos, "unterminated string");
        char d = peek();
        advance();
        if (d == '"') break;
        if (d == '\\') {
          if (i_ >= s_.size()) fail(v.pos, "unterminated string");
          d = peek();
          if (d != '\\' && d != '"') fail(pos_, "unknown escape");
          advance();
        }
        v.text.push_back(d);
      }
    } else if (c == '-' || c == '+' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) {
      number(v);
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      std::string w = word();
      if (w == "inf") {
        v.kind = Value::Kind::Number;
        v.number = std::numeric_limits<double>::infinity();
        return v;
      }
      if (w == "nan") fail(v.pos, "NaN is not allowed");
      v.text = w;
      // A tag binds only to an immediately following '(' or to a '[' on the
      // same line.
      if (peek() == '(') {
        advance();
        v.kind = Value::Kind::Tagged;
        for (;;) {
          skip();
          if (i_ >= s_.size()) fail(v.pos, "unterminated argument list");
          if (peek() == ')') break;
          v.items.push_back(value());
        }
        advance();
      } else {
        std::size_t j = i_;
        while (j < s_.size() && (s_[j] == ' ' || s_[j] == '\t')) ++j;
        if (j < s_.size() && s_[j] == '[') {
          while (i_ < j) advance();
          v.kind = Value::Kind::Tagged;
          v.items.push_back(value());
        } else {
          v.kind = Value::Kind::Word;
        }
      }
    } else {
      if (i_ >= s_.size()) fail(v.pos, "unexpected end of input");
      fail(v.pos, std::string("unexpected character '") + c + "'");
    }
    return v;
  }

  void number(Value& v) {
    std::size_t start = i_;
    while (i_ < s_.size() && word_char(s_[i_])) advance();
    std::string_view tok = s_.substr(start, i_ - start);
    std::string_view body = tok;
    if (!body.empty() && body.front() == '+') body.remove_prefix(1);
    double x = 0.0;
    auto [end, ec] = std::from_chars(body.data(), body.data() + body.size(), x);
    if (ec != std::errc() || end != body.data() + body.size() || std::isnan(x))
      fail(v.pos, "malformed number '" + std::string(tok) + "'");
    v.kind = Value::Kind::Number;
    v.number = x;
  }

  std::string_view s_;
  std::size_t i_ = 0;
  Pos pos_;
};

inline Entries parse(std::string_view src) { return Parser(src).document(); }

// ---------------------------------------------------------------------------
// Reading helpers
// ---------------------------------------------------------------------------

/// Entries of one block with duplicate, missing and unknown keys reported.
class Fields {
 public:
  Fields(const Entries& entries, Pos where, std::string context)
      : entries_(entries), where_(where), context_(std::move(context)), used_(entries.size(), false) {
    for (std::size_t i = 0; i < entries.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (entries[i].first == entries[j].first)
          fail(entries[i].second.pos, "duplicate key '" + entries[i].first + "'" + in());
  }

  const Value* find(const std::string& key) {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].first == key) {
        used_[i] = true;
        return &entries_[i].second;
      }
    return nullptr;
  }

  const Value& get(const std::string& key) {
    if (auto* v = find(key)) return *v;
    fail(where_, "missing key '" + key + "'" + in());
  }

  void finish() const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (!used_[i]) fail(entries_[i].second.pos, "unknown key '" + entries_[i].first + "'" + in());
  }

 private:
  std::string in() const { return context_.empty() ? "" : " in " + context_; }

  const Entries& entries_;
  Pos where_;
  std::string context_;
  std::vector<bool> used_;
};

inline void want(const Value& v, Value::Kind k, const std::string& what) {
  if (v.kind != k) fail(v.pos, what + ": expected " + kind_name(k) + ", found " + kind_name(v.kind));
}

inline double as_number(const Value& v, const std::string& what) {
  want(v, Value::Kind::Number, what);
  return v.number;
}

inline long long as_integer(const Value& v, const std::string& what) {
  double x = as_number(v, what);
  if (!(x == std::floor(x)) || std::abs(x) > 1e15) fail(v.pos, what + ": expected an integer");
  return static_cast<long long>(x);
}

inline Eigen::Index as_count(const Value& v, const std::string& what) {
  auto n = as_integer(v, what);
  if (n < 0) fail(v.pos, what + ": must be nonnegative");
  return static_cast<Eigen::Index>(n);
}

inline std::string as_string(const Value& v, const std::string& what) {
  want(v, Value::Kind::String, what);
  return v.text;
}

inline std::string as_word(const Value& v, const std::string& what) {
  want(v, Value::Kind::Word, what);
  return v.text;
}

inline const Value& as_block(const Value& v, const std::string& what) {
  want(v, Value::Kind::Block, what);
  return v;
}

inline Vector as_vector(const Value& v, const std::string& what, std::optional<Eigen::Index> len = {}) {
  want(v, Value::Kind::List, what);
  Vector out(static_cast<Eigen::Index>(v.items.size()));
  for (std::size_t i = 0; i < v.items.size(); ++i) out[static_cast<Eigen::Index>(i)] = as_number(v.items[i], what);
  if (len && out.size() != *len)
    throw InvariantError(what, "expected " + std::to_string(*len) + " entries, found " + std::to_string(out.size()));
  return out;
}

inline Matrix as_matrix(const Value& v, const std::string& what, std::optional<Eigen::Index> rows,
                        Eigen::Index cols) {
  want(v, Value::Kind::List, what);
  const auto r = static_cast<Eigen::Index>(v.items.size());
  if (rows && r != *rows)
    throw InvariantError(what, "expected " + std::to_string(*rows) + " rows, found " + std::to_string(r));
  Matrix out(r, cols);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = v.items[static_cast<std::size_t>(i)];
    want(row, Value::Kind::List, what + " row");
    if (static_cast<Eigen::Index>(row.items.size()) != cols)
      throw InvariantError(what, "row " + std::to_string(i + 1) + " has " + std::to_string(row.items.size()) +
                                     " entries, expected " + std::to_string(cols));
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = as_number(row.items[static_cast<std::size_t>(j)], what);
  }
  return out;
}

inline std::vector<double> as_std_vector(const Value& v, const std::string& what) {
  Vector x = as_vector(v, what);
  return {x.data(), x.data() + x.size()};
}

// ---------------------------------------------------------------------------
// Writing helpers
// ---------------------------------------------------------------------------

inline std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

template <class V>
std::string list(const V& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(v.size()); ++i) {
    if (i) out += ' ';
    out += num(v[i]);
  }
  return out + "]";
}

inline std::string list(const std::vector<double>& v) {
  return list(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
}

/// One row per line below the key.
inline std::string matrix(const Matrix& m, const std::string& indent) {
  if (m.rows() == 0) return "[]";
  std::string out = "[\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) out += indent + "  " + list(Vector(m.row(i).transpose())) + "\n";
  return out + indent + "]";
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace text

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

/// An instance plus the pump parameters it was generated from, when known.
struct InstanceDocument {
  ProblemInstance instance;
  std::optional<PumpParams> pump;
};

namespace detail {

inline std::optional<std::array<int, 3>> causal_shape(const AdjustabilityMask& mask) {
  const auto n_x = mask.n_x(), n_u = mask.n_u();
  if (n_u == 0 || n_x % n_u != 0) return std::nullopt;
  const int T = static_cast<int>(n_u), P = static_cast<int>(n_x / n_u);
  for (int kappa = 1; kappa <= T; ++kappa)
    if (AdjustabilityMask::causal(kappa, P, T) == mask) return std::array<int, 3>{kappa, P, T};
  return std::nullopt;
}

inline Box read_box(const text::Value& v, const std::string& field, Eigen::Index n) {
  text::Fields f(text::as_block(v, field).entries, v.pos, field);
  Vector lo = text::as_vector(f.get("lower"), field, n);
  Vector hi = text::as_vector(f.get("upper"), field, n);
  f.finish();
  for (Eigen::Index i = 0; i < n; ++i)
    require(lo[i] <= hi[i], field, "lower > upper in coordinate " + std::to_string(i + 1));
  return {lo, hi};
}

inline AdjustabilityMask read_mask(const text::Value& v, Eigen::Index n_x, Eigen::Index n_u) {
  using K = text::Value::Kind;
  if (v.kind == K::Tagged && v.text == "causal") {
    if (v.items.size() != 3) text::fail(v.pos, "mask: causal takes (kappa, pumps, periods)");
    auto kappa = text::as_integer(v.items[0], "mask"), P = text::as_integer(v.items[1], "mask"),
         T = text::as_integer(v.items[2], "mask");
    require(kappa >= 0 && P >= 1 && T >= 1, "mask", "causal arguments out of range");
    require(P * T == n_x && T == n_u, "mask", "causal(kappa, P, T) needs n_x = P*T and n_u = T");
    return AdjustabilityMask::causal(static_cast<int>(kappa), static_cast<int>(P), static_cast<int>(T));
  }
  if (v.kind == K::Tagged) text::fail(v.pos, "mask: unknown shorthand '" + v.text + "'");
  Matrix m = text::as_matrix(v, "mask", n_x, n_u);
  AdjustabilityMask out(n_x, n_u, false);
  for (Eigen::Index i = 0; i < n_x; ++i)
    for (Eigen::Index j = 0; j < n_u; ++j) {
      require(m(i, j) == 0.0 || m(i, j) == 1.0, "mask", "entries must be 0 or 1");
      out.set(i, j, m(i, j) == 1.0);
    }
  return out;
}

inline PumpParams read_pump(const text::Value& v) {
  const std::string field = "pumpParams";
  text::Fields f(text::as_block(v, field).entries, v.pos, field);
  PumpParams p;
  p.P = static_cast<int>(text::as_integer(f.get("P"), field));
  p.T = static_cast<int>(text::as_integer(f.get("T"), field));
  p.kappa = static_cast<int>(text::as_integer(f.get("kappa"), field));
  p.N = text::as_number(f.get("N"), field);
  p.areaA = text::as_number(f.get("areaA"), field);
  p.hMin = text::as_number(f.get("hMin"), field);
  p.hMax = text::as_number(f.get("hMax"), field);
  p.hMinT = text::as_number(f.get("hMinT"), field);
  p.h0 = text::as_number(f.get("h0"), field);
  p.e = text::as_std_vector(f.get("e"), field);
  p.c2 = text::as_std_vector(f.get("c2"), field);
  p.c1 = text::as_std_vector(f.get("c1"), field);
  p.c0 = text::as_std_vector(f.get("c0"), field);
  p.Q = text::as_std_vector(f.get("Q"), field);
  p.uMin = text::as_std_vector(f.get("uMin"), field);
  p.uMax = text::as_std_vector(f.get("uMax"), field);
  if (auto* n = f.find("uNominal")) p.uNominal = text::as_std_vector(*n, field);
  f.finish();
  return p;
}

/// Names the first part of `got` that differs from what the pump model builds.
inline void check_against_pump(const ProblemInstance& got, const PumpParams& p) {
  ProblemInstance want = build_instance(p);
  const std::string why = "explicit data differs from the pump model built from pumpParams";
  require(got.n_x() == want.n_x() && got.n_u() == want.n_u(), "metadata", why);
  require(got.objective() == want.objective(), "objective", why);
  require(got.general_constraints() == want.general_constraints(), "constraints", why);
  require(got.u_box() == want.u_box(), "uBox", why);
  require(got.x_box() == want.x_box(), "xBox", why);
  require(got.mask() == want.mask(), "mask", why);
  require(got.N() == want.N(), "N", why);
  require(got.nominal().has_value() == want.nominal().has_value() &&
              (!got.nominal() || *got.nominal() == *want.nominal()),
          "nominal", why);
}

}  // namespace detail

/// Parses an instance document. Syntax errors raise FormatError; data that is
/// well formed but inconsistent raises InvariantError naming the field.
inline InstanceDocument parse_instance_document(std::string_view src) {
  auto entries = text::parse(src);
  text::Fields top(entries, {1, 1}, "");

  const auto& meta_v = top.get("metadata");
  text::Fields meta(text::as_block(meta_v, "metadata").entries, meta_v.pos, "metadata");
  std::string name = text::as_string(meta.get("name"), "metadata");
  const auto n_x = text::as_count(meta.get("n_x"), "n_x");
  const auto n_u = text::as_count(meta.get("n_u"), "n_u");
  meta.finish();
  require(n_x >= 1, "metadata", "n_x must be positive");
  require(!name.empty(), "metadata", "name must not be empty");

  const auto& obj_v = top.get("objective");
  text::Fields obj(text::as_block(obj_v, "objective").entries, obj_v.pos, "objective");
  const auto& h_v = obj.get("H");
  Matrix H;
  if (h_v.kind == text::Value::Kind::Tagged) {
    if (h_v.text != "diagonal" || h_v.items.size() != 1) text::fail(h_v.pos, "H: unknown shorthand '" + h_v.text + "'");
    H = text::as_vector(h_v.items[0], "objective", n_x).asDiagonal();
  } else {
    H = text::as_matrix(h_v, "objective", n_x, n_x);
  }
  Vector c = text::as_vector(obj.get("c"), "objective", n_x);
  double d = text::as_number(obj.get("d"), "objective");
  obj.finish();

  const auto& con_v = top.get("constraints");
  text::Fields con(text::as_block(con_v, "constraints").entries, con_v.pos, "constraints");
  Matrix A = text::as_matrix(con.get("A"), "constraints", std::nullopt, n_x);
  Vector b0 = text::as_vector(con.get("b0"), "constraints", A.rows());
  Matrix B = text::as_matrix(con.get("B"), "constraints", A.rows(), n_u);
  con.finish();

  Box u_box = detail::read_box(top.get("uBox"), "uBox", n_u);
  Box x_box = detail::read_box(top.get("xBox"), "xBox", n_x);
  AdjustabilityMask mask = detail::read_mask(top.get("mask"), n_x, n_u);
  double N = text::as_number(top.get("N"), "N");
  std::optional<Vector> nominal;
  if (auto* v = top.find("nominal")) nominal = text::as_vector(*v, "nominal", n_u);
  std::optional<PumpParams> pump;
  if (auto* v = top.find("pumpParams")) pump = detail::read_pump(*v);
  top.finish();

  InstanceDocument doc{ProblemInstance(name, QuadraticObjective(H, c, d), ConstraintSystem(A, b0, B), u_box, x_box,
                                       mask, N, nominal),
                       std::nullopt};
  if (pump) {
    pump->name = name;
    detail::check_against_pump(doc.instance, *pump);
    doc.pump = std::move(pump);
  }
  return doc;
}

inline ProblemInstance parse_instance(std::string_view src) { return parse_instance_document(src).instance; }

inline std::string serialize_instance(const ProblemInstance& inst, const std::optional<PumpParams>& pump = {}) {
  using text::num, text::list;
  const auto& o = inst.objective();
  const auto& g = inst.general_constraints();
  std::string s = "# regret-adjust instance\n";
  s += "metadata {\n  name " + text::quote(inst.name()) + "\n  n_x " + std::to_string(inst.n_x()) + "\n  n_u " +
       std::to_string(inst.n_u()) + "\n}\n";
  s += "objective {\n";
  if (o.is_diagonal())
    s += "  H diagonal " + list(Vector(o.H.diagonal())) + "\n";
  else
    s += "  H " + text::matrix(o.H, "  ") + "\n";
  s += "  c " + list(o.c) + "\n  d " + num(o.d) + "\n}\n";
  s += "constraints {\n  A " + text::matrix(g.A, "  ") + "\n  b0 " + list(g.b0) + "\n  B " + text::matrix(g.B, "  ") +
       "\n}\n";
  s += "uBox {\n  lower " + list(inst.u_box().lower()) + "\n  upper " + list(inst.u_box().upper()) + "\n}\n";
  s += "xBox {\n  lower " + list(inst.x_box().lower()) + "\n  upper " + list(inst.x_box().upper()) + "\n}\n";
  if (auto shape = detail::causal_shape(inst.mask())) {
    s += "mask causal(" + std::to_string((*shape)[0]) + ", " + std::to_string((*shape)[1]) + ", " +
         std::to_string((*shape)[2]) + ")\n";
  } else {
    Matrix m(inst.n_x(), inst.n_u());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = inst.mask().allows(i, j) ? 1.0 : 0.0;
    s += "mask " + text::matrix(m, "") + "\n";
  }
  s += "N " + num(inst.N()) + "\n";
  if (inst.nominal()) s += "nominal " + list(*inst.nominal()) + "\n";
  if (pump) {
    const auto& p = *pump;
    s += "pumpParams {\n";
    s += "  P " + std::to_string(p.P) + "\n  T " + std::to_string(p.T) + "\n  kappa " + std::to_string(p.kappa) + "\n";
    s += "  N " + num(p.N) + "\n  areaA " + num(p.areaA) + "\n  hMin " + num(p.hMin) + "\n  hMax " + num(p.hMax) +
         "\n  hMinT " + num(p.hMinT) + "\n  h0 " + num(p.h0) + "\n";
    s += "  e " + list(p.e) + "\n  c2 " + list(p.c2) + "\n  c1 " + list(p.c1) + "\n  c0 " + list(p.c0) + "\n  Q " +
         list(p.Q) + "\n";
    s += "  uMin " + list(p.uMin) + "\n  uMax " + list(p.uMax) + "\n";
    if (p.uNominal) s += "  uNominal " + list(*p.uNominal) + "\n";
    s += "}\n";
  }
  return s;
}

inline std::string serialize_instance(const InstanceDocument& doc) { return serialize_instance(doc.instance, doc.pump); }

/// Canonical text of a shipped instance, as stored under data/instances.
inline std::string dump_builtin(const std::string& name) {
  for (const auto& p : builtin_params())
    if (p.name == name) return serialize_instance(build_instance(p), p);
  throw std::invalid_argument("unknown built-in instance '" + name + "'");
}

// ---------------------------------------------------------------------------
// Rules and scenario lists
// ---------------------------------------------------------------------------

namespace detail {

inline DecisionRule read_rule_block(const text::Value& v) {
  text::Fields f(text::as_block(v, "rule").entries, v.pos, "rule");
  const auto n_x = text::as_count(f.get("n_x"), "rule");
  const auto n_u = text::as_count(f.get("n_u"), "rule");
  double N = text::as_number(f.get("N"), "rule");
  Vector pi0 = text::as_vector(f.get("pi0"), "rule", n_x);
  Matrix Pi = text::as_matrix(f.get("Pi"), "rule", n_x, n_u);
  f.finish();
  return {pi0, Pi, N};
}

inline std::string rule_block(const DecisionRule& r) {
  return "rule {\n  n_x " + std::to_string(r.n_x()) + "\n  n_u " + std::to_string(r.n_u()) + "\n  N " +
         text::num(r.N) + "\n  pi0 " + text::list(r.pi0) + "\n  Pi " + text::matrix(r.Pi, "  ") + "\n}\n";
}

}  // namespace detail

inline DecisionRule parse_rule(std::string_view src) {
  auto entries = text::parse(src);
  text::Fields top(entries, {1, 1}, "");
  auto rule = detail::read_rule_block(top.get("rule"));
  top.finish();
  return rule;
}

inline std::string serialize_rule(const DecisionRule& rule) { return "# regret-adjust rule\n" + detail::rule_block(rule); }

/// `scenarios [[u1 u2 ...] ...]`; every row must have `n_u` entries.
inline std::vector<Vector> parse_scenarios(std::string_view src, Eigen::Index n_u) {
  auto entries = text::parse(src);
  text::Fields top(entries, {1, 1}, "");
  Matrix m = text::as_matrix(top.get("scenarios"), "scenarios", std::nullopt, n_u);
  top.finish();
  std::vector<Vector> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).transpose());
  return out;
}

inline std::string serialize_scenarios(const std::vector<Vector>& scenarios) {
  std::string s = "# regret-adjust scenarios\nscenarios [\n";
  for (const auto& u : scenarios) s += "  " + text::list(u) + "\n";
  return s + "]\n";
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ReportDocument {
  std::string instance;
  SolveReport report;
};

namespace detail {

template <class E>
E read_enum(const text::Value& v, const std::string& field, std::initializer_list<E> all) {
  std::string w = text::as_word(v, field);
  for (E e : all)
    if (w == to_string(e)) return e;
  text::fail(v.pos, field + ": unknown value '" + w + "'");
}

}  // namespace detail

inline std::string serialize_report(const SolveReport& r, const std::string& instance_name) {
  using text::num, text::list;
  std::string s = "# regret-adjust report\n";
  s += "report {\n  instance " + text::quote(instance_name) + "\n  mode " + to_string(r.mode) + "\n  status " +
       to_string(r.status) + "\n  lowerBound " + num(r.lowerBound) + "\n  upperBound " + num(r.upperBound) +
       "\n  epsilon " + num(r.epsilon) + "\n  effectiveEpsilon " + num(r.effectiveEpsilon) + "\n";
  if (r.seed) s += "  seed " + std::to_string(*r.seed) + "\n";
  s += "  message " + text::quote(r.message) + "\n}\n";
  s += detail::rule_block(r.rule);
  s += "history [\n";
  for (const auto& h : r.history) {
    s += "  {\n    k " + std::to_string(h.k) + "\n    addedBy " + to_string(h.addedBy) + "\n";
    if (h.addedScenario) s += "    scenario " + list(*h.addedScenario) + "\n";
    s += "    rK " + num(h.rK) + "\n";
    if (h.maxRegretUpper) s += "    stageValue " + num(*h.maxRegretUpper) + "\n";
    s += "    violation " + num(h.violation) + "\n    bnbNodes " + std::to_string(h.bnbNodes) + "\n    seconds " +
         list(std::vector<double>{h.stageTimings.stage1, h.stageTimings.stage2, h.stageTimings.stage3}) + "\n  }\n";
  }
  s += "]\n";
  const auto& box = r.discretizationFinal.u_box();
  s += "discretization {\n  lower " + list(box.lower()) + "\n  upper " + list(box.upper()) + "\n  scenarios [\n";
  for (const auto& e : r.discretizationFinal.entries())
    s += "    {\n      u " + list(e.u) + "\n      phi " + num(e.phi) + "\n      x " + list(e.x_star) + "\n    }\n";
  s += "  ]\n}\n";
  return s;
}

inline ReportDocument parse_report(std::string_view src) {
  auto entries = text::parse(src);
  text::Fields top(entries, {1, 1}, "");
  ReportDocument doc;
  auto& r = doc.report;

  const auto& head_v = top.get("report");
  text::Fields head(text::as_block(head_v, "report").entries, head_v.pos, "report");
  doc.instance = text::as_string(head.get("instance"), "report");
  r.mode = detail::read_enum(head.get("mode"), "mode", {SolveMode::Regret, SolveMode::WorstCase});
  r.status = detail::read_enum(head.get("status"), "status",
                               {SolveStatus::Converged, SolveStatus::IterationBudget, SolveStatus::InstanceInfeasible});
  r.lowerBound = text::as_number(head.get("lowerBound"), "report");
  r.upperBound = text::as_number(head.get("upperBound"), "report");
  r.epsilon = text::as_number(head.get("epsilon"), "report");
  r.effectiveEpsilon = text::as_number(head.get("effectiveEpsilon"), "report");
  if (auto* v = head.find("seed")) {
    auto seed = text::as_integer(*v, "seed");
    if (seed < 0) text::fail(v->pos, "seed: must be nonnegative");
    r.seed = static_cast<std::uint64_t>(seed);
  }
  r.message = text::as_string(head.get("message"), "report");
  head.finish();

  r.rule = detail::read_rule_block(top.get("rule"));
  const auto n_x = r.rule.n_x(), n_u = r.rule.n_u();

  const auto& hist = top.get("history");
  text::want(hist, text::Value::Kind::List, "history");
  for (const auto& item : hist.items) {
    text::Fields f(text::as_block(item, "history").entries, item.pos, "history record");
    IterationRecord h;
    h.k = static_cast<std::size_t>(text::as_count(f.get("k"), "history"));
    h.addedBy = detail::read_enum(f.get("addedBy"), "addedBy",
                                  {AddedBy::Initial, AddedBy::Infeasibility, AddedBy::MaxRegret, AddedBy::MaxCost,
                                   AddedBy::None});
    if (auto* v = f.find("scenario")) h.addedScenario = text::as_vector(*v, "history", n_u);
    h.rK = text::as_number(f.get("rK"), "history");
    if (auto* v = f.find("stageValue")) h.maxRegretUpper = text::as_number(*v, "history");
    h.violation = text::as_number(f.get("violation"), "history");
    h.bnbNodes = static_cast<std::size_t>(text::as_count(f.get("bnbNodes"), "history"));
    Vector t = text::as_vector(f.get("seconds"), "history", 3);
    h.stageTimings = {t[0], t[1], t[2]};
    f.finish();
    r.history.push_back(std::move(h));
  }

  const auto& disc_v = top.get("discretization");
  text::Fields disc(text::as_block(disc_v, "discretization").entries, disc_v.pos, "discretization");
  Vector lo = text::as_vector(disc.get("lower"), "discretization", n_u);
  Vector hi = text::as_vector(disc.get("upper"), "discretization", n_u);
  r.discretizationFinal = Discretization(Box(lo, hi));
  const auto& sc = disc.get("scenarios");
  text::want(sc, text::Value::Kind::List, "discretization");
  for (const auto& item : sc.items) {
    text::Fields f(text::as_block(item, "discretization").entries, item.pos, "scenario");
    ScenarioEntry e;
    e.u = text::as_vector(f.get("u"), "discretization", n_u);
    e.phi = text::as_number(f.get("phi"), "discretization");
    e.x_star = text::as_vector(f.get("x"), "discretization", n_x);
    f.finish();
    if (!r.discretizationFinal.add(std::move(e))) text::fail(item.pos, "duplicate scenario in discretization");
  }
  disc.finish();
  top.finish();
  return doc;
}

}  // namespace regret_adjust
