#include "qsynth/predicates.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace qsynth {

void Var::validate() const {
  if (lower > upper) {
    throw std::invalid_argument("variable '" + name + "': lower bound exceeds upper bound");
  }
  if (kind == VarKind::Boolean && (lower != Rational(0) || upper != Rational(1))) {
    throw std::invalid_argument("variable '" + name + "': boolean must range over {0,1}");
  }
  if (kind == VarKind::Discrete && (!lower.is_integer() || !upper.is_integer())) {
    throw std::invalid_argument("variable '" + name + "': discrete bounds must be integers");
  }
}

Var continuous_var(std::string name, Rational lo, Rational hi) {
  Var v{std::move(name), VarKind::Continuous, std::move(lo), std::move(hi)};
  v.validate();
  return v;
}

Var discrete_var(std::string name, Rational lo, Rational hi) {
  Var v{std::move(name), VarKind::Discrete, std::move(lo), std::move(hi)};
  v.validate();
  return v;
}

Var boolean_var(std::string name) {
  return Var{std::move(name), VarKind::Boolean, Rational(0), Rational(1)};
}

LinearExpr LinearExpr::variable(const std::string& name) {
  LinearExpr e;
  e.terms_.emplace_back(name, Rational(1));
  return e;
}

Rational LinearExpr::coeff(const std::string& name) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), name,
                             [](const auto& t, const std::string& n) { return t.first < n; });
  if (it != terms_.end() && it->first == name) return it->second;
  return Rational(0);
}

void LinearExpr::add_term(const std::string& name, const Rational& c) {
  if (c.is_zero()) return;
  auto it = std::lower_bound(terms_.begin(), terms_.end(), name,
                             [](const auto& t, const std::string& n) { return t.first < n; });
  if (it != terms_.end() && it->first == name) {
    it->second += c;
    if (it->second.is_zero()) terms_.erase(it);
  } else {
    terms_.insert(it, {name, c});
  }
}

LinearExpr& LinearExpr::operator+=(const LinearExpr& o) {
  for (const auto& [n, c] : o.terms_) add_term(n, c);
  constant_ += o.constant_;
  return *this;
}

LinearExpr& LinearExpr::operator-=(const LinearExpr& o) {
  for (const auto& [n, c] : o.terms_) add_term(n, -c);
  constant_ -= o.constant_;
  return *this;
}

LinearExpr& LinearExpr::operator*=(const Rational& c) {
  if (c.is_zero()) {
    terms_.clear();
    constant_ = Rational(0);
    return *this;
  }
  for (auto& [n, t] : terms_) t *= c;
  constant_ *= c;
  return *this;
}

LinearExpr LinearExpr::operator-() const {
  LinearExpr e(*this);
  e *= Rational(-1);
  return e;
}

Rational LinearExpr::eval(const Valuation& v) const {
  Rational r = constant_;
  for (const auto& [n, c] : terms_) {
    auto it = v.find(n);
    if (it == v.end()) throw std::runtime_error("valuation missing variable '" + n + "'");
    r += c * it->second;
  }
  return r;
}

std::string LinearExpr::to_string() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [n, c] : terms_) {
    if (first) {
      if (c == Rational(1)) os << n;
      else if (c == Rational(-1)) os << "-" << n;
      else os << c << "*" << n;
      first = false;
    } else {
      Rational a = c.abs();
      os << (c.sign() < 0 ? " - " : " + ");
      if (a == Rational(1)) os << n;
      else os << a << "*" << n;
    }
  }
  if (first) {
    os << constant_;
  } else if (!constant_.is_zero()) {
    os << (constant_.sign() < 0 ? " - " : " + ") << constant_.abs();
  }
  return os.str();
}

bool Constraint::holds(const Valuation& v) const {
  Rational lhs = expr.eval(v);
  switch (sense) {
    case Sense::Le: return lhs <= bound;
    case Sense::Ge: return lhs >= bound;
    case Sense::Eq: return lhs == bound;
  }
  return false;
}

std::string Constraint::to_string() const {
  const char* op = sense == Sense::Le ? "<=" : (sense == Sense::Ge ? ">=" : "=");
  return expr.to_string() + " " + op + " " + bound.to_string();
}

const Var* GuardedPredicate::find_var(const std::string& name) const {
  for (const auto& v : vars)
    if (v.name == name) return &v;
  return nullptr;
}

const Var* ConjunctivePredicate::find_var(const std::string& name) const {
  for (const auto& v : vars)
    if (v.name == name) return &v;
  return nullptr;
}

GuardedPredicate ConjunctivePredicate::as_guarded() const {
  GuardedPredicate g;
  g.vars = vars;
  for (const auto& c : items) g.items.push_back({std::nullopt, c});
  return g;
}

void GuardedPredicate::validate() const {
  for (const auto& v : vars) v.validate();
  for (const auto& it : items) {
    for (const auto& [n, c] : it.body.expr.terms()) {
      (void)c;
      if (!find_var(n)) throw std::invalid_argument("predicate mentions unknown variable '" + n + "'");
    }
    if (it.guard) {
      const Var* g = find_var(it.guard->var);
      if (!g) throw std::invalid_argument("guard on unknown variable '" + it.guard->var + "'");
      if (g->kind != VarKind::Boolean) {
        throw std::invalid_argument("guard variable '" + it.guard->var + "' is not boolean");
      }
    }
  }
}

bool evaluate(const GuardedPredicate& p, const Valuation& v) {
  for (const auto& var : p.vars) {
    if (v.find(var.name) == v.end()) {
      throw std::runtime_error("valuation missing variable '" + var.name + "'");
    }
  }
  for (const auto& it : p.items) {
    if (it.guard) {
      const Rational& g = v.at(it.guard->var);
      bool active = it.guard->positive ? g == Rational(1) : g == Rational(0);
      if (!active) continue;
    }
    if (!it.body.holds(v)) return false;
  }
  return true;
}

bool evaluate(const ConjunctivePredicate& p, const Valuation& v) {
  return evaluate(p.as_guarded(), v);
}

std::pair<Rational, Rational> interval_bounds(const LinearExpr& e, const std::vector<Var>& vars) {
  Rational lo = e.constant(), hi = e.constant();
  for (const auto& [n, c] : e.terms()) {
    const Var* v = nullptr;
    for (const auto& cand : vars)
      if (cand.name == n) { v = &cand; break; }
    if (!v) throw std::runtime_error("interval_bounds: unknown variable '" + n + "'");
    if (c.sign() >= 0) {
      lo += c * v->lower;
      hi += c * v->upper;
    } else {
      lo += c * v->upper;
      hi += c * v->lower;
    }
  }
  return {lo, hi};
}

namespace {

// One direction of the elimination: body normalized to expr <= bound.
Constraint relax_le(const LinearExpr& expr, const Rational& bound, const Guard& g,
                    const std::vector<Var>& vars) {
  auto [lo, hi] = interval_bounds(expr, vars);
  (void)lo;
  Rational m = max(Rational(0), hi - bound);
  // guard on:  expr <= bound;  guard off: expr <= bound + M (vacuous)
  LinearExpr e = expr;
  Rational b = bound;
  if (g.positive) {
    // expr <= bound + M(1-y)  ==  expr + M*y <= bound + M
    e.add_term(g.var, m);
    b += m;
  } else {
    // expr <= bound + M*y
    e.add_term(g.var, -m);
  }
  return make_le(std::move(e), std::move(b));
}

}  // namespace

ConjunctivePredicate eliminate_guards(const GuardedPredicate& p) {
  p.validate();
  ConjunctivePredicate out;
  out.vars = p.vars;
  for (const auto& it : p.items) {
    if (!it.guard) {
      out.items.push_back(it.body);
      continue;
    }
    const Constraint& c = it.body;
    // normalize to <= form(s), relax each, keep orientation readable
    if (c.sense == Sense::Le || c.sense == Sense::Eq) {
      out.items.push_back(relax_le(c.expr, c.bound, *it.guard, p.vars));
    }
    if (c.sense == Sense::Ge || c.sense == Sense::Eq) {
      Constraint r = relax_le(-c.expr, -c.bound, *it.guard, p.vars);
      // store as >= to keep printed form close to the source
      out.items.push_back(make_ge(-r.expr, -r.bound));
    }
  }
  return out;
}

}  // namespace qsynth
