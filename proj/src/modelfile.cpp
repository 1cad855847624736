#include "qsynth/modelfile.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "qsynth/builtins.hpp"

namespace qsynth {

namespace {

// --- tokenizer --------------------------------------------------------------

enum class Tok { Ident, Number, Op, End };

struct Lexer {
  std::string_view s;
  size_t pos = 0;
  int line;

  Tok kind = Tok::End;
  std::string text;

  explicit Lexer(std::string_view sv, int line_) : s(sv), line(line_) { next(); }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line, msg); }

  void next() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos >= s.size()) {
      kind = Tok::End;
      text.clear();
      return;
    }
    char c = s[pos];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t b = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) {
        ++pos;
      }
      if (pos < s.size() && s[pos] == '\'') ++pos;  // primed variable
      kind = Tok::Ident;
      text = std::string(s.substr(b, pos - b));
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[pos + 1])))) {
      size_t b = pos;
      while (pos < s.size() && (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.')) ++pos;
      // rational literal a/b
      if (pos < s.size() && s[pos] == '/' && pos + 1 < s.size() &&
          std::isdigit(static_cast<unsigned char>(s[pos + 1]))) {
        ++pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      }
      kind = Tok::Number;
      text = std::string(s.substr(b, pos - b));
      return;
    }
    // multi-char operators
    static const char* two[] = {"<=", ">=", "->"};
    for (const char* op : two) {
      if (s.substr(pos, 2) == op) {
        kind = Tok::Op;
        text = op;
        pos += 2;
        return;
      }
    }
    kind = Tok::Op;
    text = std::string(1, c);
    ++pos;
  }

  bool accept(const std::string& op) {
    if (kind == Tok::Op && text == op) {
      next();
      return true;
    }
    return false;
  }

  void expect(const std::string& op) {
    if (!accept(op)) fail("expected '" + op + "' but found '" + text + "'");
  }
};

// --- parsed expressions -----------------------------------------------------

struct NlPart {
  Rational coeff;
  std::string fn, arg;
};

struct PExpr {
  LinearExpr lin;  // includes the constant
  std::vector<NlPart> nl;

  PExpr& operator+=(const PExpr& o) {
    lin += o.lin;
    for (const auto& p : o.nl) nl.push_back(p);
    return *this;
  }
  PExpr& negate() {
    lin *= Rational(-1);
    for (auto& p : nl) p.coeff = -p.coeff;
    return *this;
  }
  PExpr& scale(const Rational& c) {
    lin *= c;
    for (auto& p : nl) p.coeff *= p.coeff.is_zero() ? Rational(0) : c;
    return *this;
  }
  bool is_const() const { return lin.is_constant() && nl.empty(); }
};

struct ExprParser {
  Lexer& lx;
  const std::map<std::string, Rational>& params;

  PExpr parse() { return expr(); }

  PExpr expr() {
    PExpr e = term(false);
    for (;;) {
      if (lx.accept("+")) {
        PExpr t = term(false);
        e += t;
      } else if (lx.accept("-")) {
        PExpr t = term(false);
        e += t.negate();
      } else {
        return e;
      }
    }
  }

  PExpr term(bool negated) {
    PExpr f = factor();
    for (;;) {
      if (lx.accept("*")) {
        PExpr g = factor();
        if (f.is_const()) {
          Rational c = f.lin.constant();
          f = g;
          f.scale(c);
        } else if (g.is_const()) {
          f.scale(g.lin.constant());
        } else {
          lx.fail("nonlinear products are not supported; use the built-in functions");
        }
      } else {
        break;
      }
    }
    if (negated) f.negate();
    return f;
  }

  PExpr factor() {
    if (lx.accept("-")) return factor().negate();
    if (lx.accept("+")) return factor();
    if (lx.accept("(")) {
      PExpr e = expr();
      lx.expect(")");
      return e;
    }
    PExpr e;
    if (lx.kind == Tok::Number) {
      e.lin.add_constant(Rational::from_string(lx.text));
      lx.next();
      return e;
    }
    if (lx.kind == Tok::Ident) {
      std::string name = lx.text;
      lx.next();
      if (lx.accept("(")) {
        if (!is_builtin_fn(name)) lx.fail("unknown function '" + name + "'");
        if (lx.kind != Tok::Ident) lx.fail("built-in functions take a single variable argument");
        std::string arg = lx.text;
        lx.next();
        lx.expect(")");
        e.nl.push_back({Rational(1), name, arg});
        return e;
      }
      auto it = params.find(name);
      if (it != params.end()) {
        e.lin.add_constant(it->second);
      } else {
        e.lin.add_term(name, Rational(1));
      }
      return e;
    }
    lx.fail("expected a number, variable or '('");
  }
};

struct ParsedConstraint {
  std::optional<Guard> guard;
  LinearExpr lin;
  std::vector<NlPart> nl;
  Sense sense = Sense::Le;
  Rational bound;
};

// [g ->|!g ->] EXPR op EXPR [op EXPR] with op in {<=, >=, =}; chains of
// two comparisons expand into two constraints
std::vector<ParsedConstraint> parse_constraint_line(Lexer& lx,
                                                    const std::map<std::string, Rational>& params) {
  std::optional<Guard> guard;
  // lookahead for "ident ->" / "! ident ->"
  {
    size_t save_pos = lx.pos;
    Tok save_kind = lx.kind;
    std::string save_text = lx.text;
    bool neg = lx.accept("!");
    if (lx.kind == Tok::Ident) {
      std::string g = lx.text;
      lx.next();
      if (lx.accept("->")) {
        guard = Guard{g, !neg};
      } else {
        lx.pos = save_pos;
        lx.kind = save_kind;
        lx.text = save_text;
      }
    } else if (neg) {
      lx.fail("expected a guard variable after '!'");
    }
  }
  ExprParser ep{lx, params};
  std::vector<PExpr> exprs;
  std::vector<Sense> ops;
  exprs.push_back(ep.parse());
  for (;;) {
    if (lx.accept("<=")) ops.push_back(Sense::Le);
    else if (lx.accept(">=")) ops.push_back(Sense::Ge);
    else if (lx.accept("=")) ops.push_back(Sense::Eq);
    else break;
    exprs.push_back(ep.parse());
  }
  if (ops.empty()) lx.fail("expected a comparison operator");
  if (ops.size() > 2) lx.fail("at most two chained comparisons are supported");
  if (lx.kind != Tok::End) lx.fail("trailing input '" + lx.text + "'");

  std::vector<ParsedConstraint> out;
  for (size_t i = 0; i < ops.size(); ++i) {
    PExpr l = exprs[i];
    PExpr r = exprs[i + 1];
    // move everything left: l - r {op} 0
    r.negate();
    l += r;
    ParsedConstraint c;
    c.guard = guard;
    c.sense = ops[i];
    c.bound = -l.lin.constant();
    c.lin = l.lin;
    c.lin.add_constant(-l.lin.constant());
    // merge repeated calls of the same term
    for (const auto& p : l.nl) {
      bool merged = false;
      for (auto& q : c.nl) {
        if (q.fn == p.fn && q.arg == p.arg) {
          q.coeff += p.coeff;
          merged = true;
          break;
        }
      }
      if (!merged) c.nl.push_back(p);
    }
    c.nl.erase(std::remove_if(c.nl.begin(), c.nl.end(),
                              [](const NlPart& p) { return p.coeff.is_zero(); }),
               c.nl.end());
    if (c.nl.size() > 1) lx.fail("at most one nonlinear term per constraint is supported");
    out.push_back(std::move(c));
  }
  return out;
}

std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

Rational parse_value(Lexer& lx, const std::map<std::string, Rational>& params) {
  bool neg = lx.accept("-");
  Rational v;
  if (lx.kind == Tok::Number) {
    v = Rational::from_string(lx.text);
    lx.next();
  } else if (lx.kind == Tok::Ident && params.count(lx.text)) {
    v = params.at(lx.text);
    lx.next();
  } else {
    lx.fail("expected a rational literal or parameter name");
  }
  return neg ? -v : v;
}

}  // namespace

Rational ParsedModel::param_or(const std::string& name, const Rational& dflt) const {
  auto it = params.find(name);
  return it == params.end() ? dflt : it->second;
}

ParsedModel parse_model(const std::string& text, const std::map<std::string, Rational>& overrides) {
  ParsedModel m;
  struct RawLine {
    int line;
    std::string section;
    std::string body;
  };
  std::vector<RawLine> var_lines, quant_lines, raw;

  // pass 1: parameters; everything else is kept raw so that overrides
  // apply uniformly before any value is resolved
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    std::string rest = strip(line.substr(kw.size()));
    if (kw == "param") {
      auto eq = rest.find('=');
      if (eq == std::string::npos) throw ParseError(lineno, "expected 'param NAME = VALUE'");
      std::string name = strip(rest.substr(0, eq));
      std::string val = strip(rest.substr(eq + 1));
      if (name.empty()) throw ParseError(lineno, "empty parameter name");
      Lexer lx(val, lineno);
      Rational v = parse_value(lx, m.params);
      if (lx.kind != Tok::End) throw ParseError(lineno, "trailing input after parameter value");
      m.params[name] = v;  // later lines may reference earlier params
    } else if (kw == "var") {
      var_lines.push_back({lineno, kw, rest});
    } else if (kw == "transition" || kw == "init" || kw == "goal") {
      raw.push_back({lineno, kw, rest});
    } else if (kw == "quantize") {
      quant_lines.push_back({lineno, kw, rest});
    } else {
      throw ParseError(lineno, "unknown directive '" + kw + "'");
    }
  }

  for (const auto& [k, v] : overrides) m.params[k] = v;

  // pass 2: variable declarations
  for (const auto& vl : var_lines) {
    Lexer lx(vl.body, vl.line);
    if (lx.kind != Tok::Ident) lx.fail("expected a variable name");
    std::string name = lx.text;
    lx.next();
    if (lx.kind != Tok::Ident) lx.fail("expected a role: state, input or aux");
    std::string role = lx.text;
    lx.next();
    if (lx.kind != Tok::Ident) lx.fail("expected a kind: continuous, discrete or boolean");
    std::string kind = lx.text;
    lx.next();
    Var v;
    v.name = name;
    if (kind == "continuous") v.kind = VarKind::Continuous;
    else if (kind == "discrete") v.kind = VarKind::Discrete;
    else if (kind == "boolean") v.kind = VarKind::Boolean;
    else lx.fail("unknown kind '" + kind + "'");
    if (v.kind == VarKind::Boolean) {
      v.lower = Rational(0);
      v.upper = Rational(1);
    } else {
      lx.expect("[");
      v.lower = parse_value(lx, m.params);
      lx.expect(",");
      v.upper = parse_value(lx, m.params);
      lx.expect("]");
    }
    std::optional<Rational> period;
    if (lx.kind == Tok::Ident && lx.text == "periodic") {
      lx.next();
      lx.expect("=");
      period = parse_value(lx, m.params);
    }
    if (lx.kind != Tok::End) lx.fail("trailing input after variable declaration");
    v.validate();
    if (role == "state") m.system.state.push_back(v);
    else if (role == "input") m.system.input.push_back(v);
    else if (role == "aux") m.system.aux.push_back(v);
    else lx.fail("unknown role '" + role + "'");
    if (period) {
      if (role != "state") lx.fail("only state variables can be periodic");
      m.system.periodic[name] = *period;
    }
  }

  struct QuantLine {
    int line;
    std::string var;
    std::optional<Rational> bits, floor_scale;
    std::optional<std::pair<Rational, Rational>> range;
  };
  std::vector<QuantLine> quants;
  for (const auto& qlr : quant_lines) {
    Lexer lx(qlr.body, qlr.line);
    if (lx.kind != Tok::Ident) lx.fail("expected a variable name");
    QuantLine ql;
    ql.line = qlr.line;
    ql.var = lx.text;
    lx.next();
    while (lx.kind == Tok::Ident) {
      std::string attr = lx.text;
      lx.next();
      lx.expect("=");
      if (attr == "bits") {
        ql.bits = parse_value(lx, m.params);
      } else if (attr == "floor") {
        ql.floor_scale = parse_value(lx, m.params);
      } else if (attr == "range") {
        lx.expect("[");
        Rational lo = parse_value(lx, m.params);
        lx.expect(",");
        Rational hi = parse_value(lx, m.params);
        lx.expect("]");
        ql.range = {lo, hi};
      } else {
        lx.fail("unknown quantize attribute '" + attr + "'");
      }
    }
    if (lx.kind != Tok::End) lx.fail("trailing input after quantize line");
    quants.push_back(std::move(ql));
  }

  // pass 3: constraints (with overridden params substituted)
  auto known_state = [&](const std::string& n) {
    return std::any_of(m.system.state.begin(), m.system.state.end(),
                       [&](const Var& v) { return v.name == n; });
  };
  for (const auto& rc : raw) {
    Lexer lx(rc.body, rc.line);
    auto cs = parse_constraint_line(lx, m.params);
    for (auto& c : cs) {
      if (rc.section == "transition") {
        if (c.nl.empty()) {
          m.system.linear_items.push_back(
              {c.guard, Constraint{std::move(c.lin), c.sense, std::move(c.bound)}});
        } else {
          if (c.guard) throw ParseError(rc.line, "guarded nonlinear constraints are not supported");
          NonlinearItem it;
          it.coeff = c.nl[0].coeff;
          it.term = builtin_term(c.nl[0].fn, c.nl[0].arg);
          it.linear = std::move(c.lin);
          it.sense = c.sense;
          it.bound = std::move(c.bound);
          m.system.nonlinear_items.push_back(std::move(it));
        }
      } else {
        if (!c.nl.empty()) throw ParseError(rc.line, rc.section + " must be linear");
        if (c.guard) throw ParseError(rc.line, rc.section + " must be unguarded");
        for (const auto& [n, co] : c.lin.terms()) {
          (void)co;
          if (!known_state(n)) {
            throw ParseError(rc.line, rc.section + " mentions non-state variable '" + n + "'");
          }
        }
        auto& pred = rc.section == "init" ? m.problem.initial : m.problem.goal;
        pred.items.push_back(Constraint{std::move(c.lin), c.sense, std::move(c.bound)});
      }
    }
  }
  m.problem.initial.vars = m.system.state;
  m.problem.goal.vars = m.system.state;

  // pass 4: quantization maps
  for (const auto& ql : quants) {
    const Var* v = nullptr;
    for (const auto& sv : m.system.state)
      if (sv.name == ql.var) v = &sv;
    for (const auto& iv : m.system.input)
      if (iv.name == ql.var) v = &iv;
    if (!v) throw ParseError(ql.line, "quantize line for unknown state/input variable '" + ql.var + "'");
    Rational lo = ql.range ? ql.range->first : v->lower;
    Rational hi = ql.range ? ql.range->second : v->upper;
    if (ql.bits && ql.floor_scale) throw ParseError(ql.line, "give either bits= or floor=, not both");
    QuantMap map = QuantMap::discrete_identity(Rational(0), Rational(0));
    if (ql.bits) {
      if (!ql.bits->is_integer()) throw ParseError(ql.line, "bits= must be an integer");
      map = QuantMap::uniform(lo, hi, static_cast<int>(ql.bits->to_long()));
    } else if (ql.floor_scale) {
      map = QuantMap::floor_scale(lo, hi, *ql.floor_scale);
    } else if (v->kind != VarKind::Continuous) {
      map = QuantMap::discrete_identity(lo, hi);
    } else {
      throw ParseError(ql.line, "continuous variables need bits= or floor=");
    }
    m.quant.maps.push_back({ql.var, map});
  }
  // default identity maps for declared discrete/boolean vars without lines
  auto ensure_map = [&](const Var& v) {
    if (m.quant.has(v.name)) return;
    if (v.kind == VarKind::Continuous) {
      throw ParseError(0, "missing quantize line for continuous variable '" + v.name + "'");
    }
    m.quant.maps.push_back({v.name, QuantMap::discrete_identity(v.lower, v.upper)});
  };
  for (const auto& v : m.system.state) ensure_map(v);
  for (const auto& v : m.system.input) ensure_map(v);

  m.system.validate();
  return m;
}

ParsedModel parse_model_file(const std::string& path,
                             const std::map<std::string, Rational>& overrides) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_model(ss.str(), overrides);
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

namespace {

std::string var_line(const Var& v, const std::string& role,
                     const std::map<std::string, Rational>& periodic) {
  std::string s = "var " + v.name + " " + role + " ";
  switch (v.kind) {
    case VarKind::Continuous: s += "continuous"; break;
    case VarKind::Discrete: s += "discrete"; break;
    case VarKind::Boolean: s += "boolean"; break;
  }
  if (v.kind != VarKind::Boolean) {
    s += " [" + v.lower.to_string() + ", " + v.upper.to_string() + "]";
  }
  auto it = periodic.find(v.name);
  if (it != periodic.end()) s += " periodic=" + it->second.to_string();
  return s;
}

std::string constraint_text(const Constraint& c) {
  const char* op = c.sense == Sense::Le ? "<=" : (c.sense == Sense::Ge ? ">=" : "=");
  return c.expr.to_string() + " " + op + " " + c.bound.to_string();
}

}  // namespace

std::string print_model(const ParsedModel& m) {
  std::ostringstream os;
  for (const auto& [k, v] : m.params) os << "param " << k << " = " << v.to_string() << "\n";
  for (const auto& v : m.system.state) os << var_line(v, "state", m.system.periodic) << "\n";
  for (const auto& v : m.system.input) os << var_line(v, "input", m.system.periodic) << "\n";
  for (const auto& v : m.system.aux) os << var_line(v, "aux", m.system.periodic) << "\n";
  for (const auto& it : m.system.linear_items) {
    os << "transition ";
    if (it.guard) os << (it.guard->positive ? "" : "!") << it.guard->var << " -> ";
    os << constraint_text(it.body) << "\n";
  }
  for (const auto& it : m.system.nonlinear_items) {
    os << "transition ";
    LinearExpr lhs = it.linear;
    std::string call = it.term.fn + "(" + it.term.real_args[0] + ")";
    std::string coef;
    if (it.coeff == Rational(1)) coef = call;
    else if (it.coeff == Rational(-1)) coef = "-" + call;
    else coef = it.coeff.to_string() + "*" + call;
    std::string lintext = lhs.to_string();
    const char* op = it.sense == Sense::Le ? "<=" : (it.sense == Sense::Ge ? ">=" : "=");
    os << coef;
    if (!(lhs.is_constant() && lhs.constant().is_zero())) os << " + " << lintext;
    os << " " << op << " " << it.bound.to_string() << "\n";
  }
  for (const auto& c : m.problem.initial.items) os << "init " << constraint_text(c) << "\n";
  for (const auto& c : m.problem.goal.items) os << "goal " << constraint_text(c) << "\n";
  for (const auto& [name, map] : m.quant.maps) {
    os << "quantize " << name;
    switch (map.kind()) {
      case QuantKind::Uniform: os << " bits=" << map.bits(); break;
      case QuantKind::FloorScale: os << " floor=" << (Rational(1) / map.step()).to_string(); break;
      case QuantKind::DiscreteIdentity: break;
    }
    os << " range=[" << map.lo().to_string() << ", " << map.hi().to_string() << "]\n";
  }
  return os.str();
}

MilpProblem parse_lp(const std::string& text) {
  MilpProblem p;
  GuardedPredicate pred;
  std::map<std::string, Rational> params;
  bool have_objective = false;

  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    std::string rest = strip(line.substr(kw.size()));
    if (kw == "var") {
      Lexer lx(rest, lineno);
      if (lx.kind != Tok::Ident) lx.fail("expected a variable name");
      std::string name = lx.text;
      lx.next();
      if (lx.kind != Tok::Ident) lx.fail("expected a kind");
      std::string kind = lx.text;
      lx.next();
      Var v;
      v.name = name;
      if (kind == "continuous") v.kind = VarKind::Continuous;
      else if (kind == "discrete") v.kind = VarKind::Discrete;
      else if (kind == "boolean") v.kind = VarKind::Boolean;
      else lx.fail("unknown kind '" + kind + "'");
      if (v.kind == VarKind::Boolean) {
        v.lower = Rational(0);
        v.upper = Rational(1);
      } else {
        lx.expect("[");
        v.lower = parse_value(lx, params);
        lx.expect(",");
        v.upper = parse_value(lx, params);
        lx.expect("]");
      }
      v.validate();
      pred.vars.push_back(v);
    } else if (kw == "minimize" || kw == "maximize") {
      Lexer lx(rest, lineno);
      ExprParser ep{lx, params};
      PExpr e = ep.parse();
      if (!e.nl.empty()) lx.fail("objective must be linear");
      if (lx.kind != Tok::End) lx.fail("trailing input after objective");
      p.objective = e.lin;
      p.direction = kw == "minimize" ? MilpDirection::Minimize : MilpDirection::Maximize;
      have_objective = true;
    } else if (kw == "feasibility") {
      p.direction = MilpDirection::Feasibility;
      have_objective = true;
    } else {
      Lexer lx(line, lineno);
      auto cs = parse_constraint_line(lx, params);
      for (auto& c : cs) {
        if (!c.nl.empty()) throw ParseError(lineno, "constraints must be linear");
        pred.items.push_back({c.guard, Constraint{std::move(c.lin), c.sense, std::move(c.bound)}});
      }
    }
  }
  if (!have_objective) p.direction = MilpDirection::Feasibility;
  pred.validate();
  p.predicate = eliminate_guards(pred);
  return p;
}

MilpProblem parse_lp_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open LP file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_lp(ss.str());
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace qsynth
