#include "qsynth/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qsynth {

namespace {

std::vector<Var> prime_all(const std::vector<Var>& xs) {
  std::vector<Var> out;
  out.reserve(xs.size());
  for (const auto& v : xs) {
    Var p = v;
    p.name = primed(v.name);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<Var> Dths::next_state() const { return prime_all(state); }

std::vector<Var> Dths::all_vars() const {
  std::vector<Var> out = state;
  for (const auto& v : input) out.push_back(v);
  for (const auto& v : aux) out.push_back(v);
  for (auto& v : prime_all(state)) out.push_back(std::move(v));
  return out;
}

void Dths::validate() const {
  auto vars = all_vars();
  auto known = [&](const std::string& n) {
    return std::any_of(vars.begin(), vars.end(), [&](const Var& v) { return v.name == n; });
  };
  for (const auto& v : vars) v.validate();
  for (const auto& it : linear_items) {
    for (const auto& [n, c] : it.body.expr.terms()) {
      (void)c;
      if (!known(n)) throw std::invalid_argument("transition mentions unknown variable '" + n + "'");
    }
    if (it.guard && !known(it.guard->var))
      throw std::invalid_argument("guard on unknown variable '" + it.guard->var + "'");
  }
  for (const auto& it : nonlinear_items) {
    for (const auto& [n, c] : it.linear.terms()) {
      (void)c;
      if (!known(n)) throw std::invalid_argument("transition mentions unknown variable '" + n + "'");
    }
    for (const auto& a : it.term.real_args)
      if (!known(a)) throw std::invalid_argument("nonlinear term argument '" + a + "' unknown");
    for (const auto& a : it.term.discrete_args)
      if (!known(a)) throw std::invalid_argument("nonlinear term argument '" + a + "' unknown");
    if (!it.term.eval) throw std::invalid_argument("nonlinear term '" + it.term.id + "' lacks an evaluator");
  }
  for (const auto& [n, p] : periodic) {
    if (!known(n)) throw std::invalid_argument("periodic declaration on unknown variable '" + n + "'");
    if (p.sign() <= 0) throw std::invalid_argument("period of '" + n + "' must be positive");
  }
}

std::vector<Var> Dtlhs::next_state() const { return prime_all(state); }

void Dtlhs::validate() const {
  transition.validate();
}

bool lts_step(const Dtlhs& h, const Valuation& x, const Valuation& u, const Valuation& xp) {
  // feasibility of N with state, input and next state pinned by equalities
  ConjunctivePredicate p = eliminate_guards(h.transition);
  auto pin = [&](const std::string& name, const Rational& val) {
    const Var* v = p.find_var(name);
    if (!v) throw std::runtime_error("lts_step: valuation mentions unknown variable '" + name + "'");
    if (val < v->lower || val > v->upper) return false;
    p.items.push_back(make_eq(LinearExpr::variable(name), val));
    return true;
  };
  for (const auto& [n, val] : x)
    if (!pin(n, val)) return false;
  for (const auto& [n, val] : u)
    if (!pin(n, val)) return false;
  for (const auto& [n, val] : xp)
    if (!pin(primed(n), val)) return false;
  MilpEngine eng(p);
  return eng.feasible({}).has_value();
}

bool lts_step(const Dths& h, const Valuation& x, const Valuation& u, const Valuation& xp,
              const std::optional<Valuation>& y) {
  if (!h.aux.empty() && !y) {
    throw std::runtime_error(
        "lts_step: existential over auxiliary variables of a nonlinear system is "
        "undecidable without a witness");
  }
  Valuation v;
  for (const auto& [n, val] : x) v[n] = val;
  for (const auto& [n, val] : u) v[n] = val;
  if (y)
    for (const auto& [n, val] : *y) v[n] = val;
  for (const auto& [n, val] : xp) v[primed(n)] = val;

  // bounds check against declared domains
  auto vars = h.all_vars();
  for (const auto& var : vars) {
    auto it = v.find(var.name);
    if (it == v.end()) throw std::runtime_error("lts_step: valuation missing variable '" + var.name + "'");
    if (it->second < var.lower || it->second > var.upper) return false;
  }

  // linear part
  for (const auto& it : h.linear_items) {
    if (it.guard) {
      const Rational& g = v.at(it.guard->var);
      bool active = it.guard->positive ? g == Rational(1) : g == Rational(0);
      if (!active) continue;
    }
    if (!it.body.holds(v)) return false;
  }
  // nonlinear part, evaluated in doubles with a small tolerance
  constexpr double kTol = 1e-9;
  for (const auto& it : h.nonlinear_items) {
    std::vector<double> r;
    std::vector<long> w;
    for (const auto& a : it.term.real_args) r.push_back(v.at(a).to_double());
    for (const auto& a : it.term.discrete_args) w.push_back(v.at(a).to_long());
    double f = it.term.eval(r, w);
    double lhs = it.coeff.to_double() * f + it.linear.eval(v).to_double();
    double b = it.bound.to_double();
    switch (it.sense) {
      case Sense::Le:
        if (lhs > b + kTol) return false;
        break;
      case Sense::Ge:
        if (lhs < b - kTol) return false;
        break;
      case Sense::Eq:
        if (std::abs(lhs - b) > kTol) return false;
        break;
    }
  }
  return true;
}

void ExplicitLts::add(int s, int a, int sp) {
  if (s < 0 || s >= nstates || sp < 0 || sp >= nstates || a < 0 || a >= nactions) {
    throw std::out_of_range("lts: transition outside state/action sets");
  }
  transitions.insert({s, a, sp});
}

std::set<int> ExplicitLts::adm(int s) const {
  if (s < 0 || s >= nstates) throw std::out_of_range("lts: unknown state");
  std::set<int> out;
  for (const auto& [s0, a, s1] : transitions) {
    (void)s1;
    if (s0 == s) out.insert(a);
  }
  return out;
}

std::set<int> ExplicitLts::img(int s, int a) const {
  if (s < 0 || s >= nstates) throw std::out_of_range("lts: unknown state");
  if (a < 0 || a >= nactions) throw std::out_of_range("lts: unknown action");
  std::set<int> out;
  for (const auto& [s0, a0, s1] : transitions) {
    if (s0 == s && a0 == a) out.insert(s1);
  }
  return out;
}

bool refines(const ExplicitLts& l1, const ExplicitLts& l2) {
  if (l1.nstates != l2.nstates || l1.nactions != l2.nactions) {
    throw std::invalid_argument("refines: mismatched state or action alphabets");
  }
  return std::includes(l2.transitions.begin(), l2.transitions.end(), l1.transitions.begin(),
                       l1.transitions.end());
}

}  // namespace qsynth
