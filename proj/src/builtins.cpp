#include "qsynth/builtins.hpp"

#include <cmath>
#include <stdexcept>

namespace qsynth {

const Rational& pi_over() {
  static const Rational r(355, 113);
  return r;
}

const Rational& pi_under() {
  static const Rational r(314159, 100000);
  return r;
}

namespace {

// closed interval of sin over [a, b], conservative in double precision
std::pair<double, double> sin_range(double a, double b) {
  double lo = std::min(std::sin(a), std::sin(b));
  double hi = std::max(std::sin(a), std::sin(b));
  const double tau = 2.0 * M_PI;
  // peaks at pi/2 + 2k pi, troughs at -pi/2 + 2k pi
  double k0 = std::ceil((a - M_PI_2) / tau);
  if (M_PI_2 + k0 * tau <= b) hi = 1.0;
  double k1 = std::ceil((a + M_PI_2) / tau);
  if (-M_PI_2 + k1 * tau <= b) lo = -1.0;
  return {lo, hi};
}

std::pair<double, double> cos_range(double a, double b) {
  return sin_range(a + M_PI_2, b + M_PI_2);
}

// remainder bounds for a C2 scalar f on a cell: given bounds [h_lo, h_hi]
// of f'' over the cell and half-width rad, the Lagrange remainder
// (1/2) f''(xi) (x - x0)^2 ranges within [min(0, h_lo rad^2 / 2), max(0, h_hi rad^2 / 2)].
std::pair<Rational, Rational> remainder_bounds(double h_lo, double h_hi, double rad) {
  double m = std::min(0.0, 0.5 * h_lo * rad * rad);
  double M = std::max(0.0, 0.5 * h_hi * rad * rad);
  // round outward onto a short decimal grid
  return {Rational::from_double_floor(m, 10), Rational::from_double_ceil(M, 10)};
}

}  // namespace

bool is_builtin_fn(const std::string& fn) {
  return fn == "sin" || fn == "cos" || fn == "sq";
}

NonlinearTerm builtin_term(const std::string& fn, const std::string& arg) {
  NonlinearTerm t;
  t.id = fn + "(" + arg + ")";
  t.fn = fn;
  t.real_args = {arg};
  t.smoothness = Smoothness::C2;
  if (fn == "sin") {
    t.eval = [](const std::vector<double>& r, const std::vector<long>&) { return std::sin(r[0]); };
    t.hessian_range = [](const Box& cell) {
      double a = cell.iv[0].first.to_double(), b = cell.iv[0].second.to_double();
      auto [slo, shi] = sin_range(a, b);
      return remainder_bounds(-shi, -slo, (b - a) / 2.0);
    };
  } else if (fn == "cos") {
    t.eval = [](const std::vector<double>& r, const std::vector<long>&) { return std::cos(r[0]); };
    t.hessian_range = [](const Box& cell) {
      double a = cell.iv[0].first.to_double(), b = cell.iv[0].second.to_double();
      auto [clo, chi] = cos_range(a, b);
      return remainder_bounds(-chi, -clo, (b - a) / 2.0);
    };
  } else if (fn == "sq") {
    t.eval = [](const std::vector<double>& r, const std::vector<long>&) { return r[0] * r[0]; };
    t.hessian_range = [](const Box& cell) {
      Rational rad = (cell.iv[0].second - cell.iv[0].first) / Rational(2);
      return std::make_pair(Rational(0), rad * rad);
    };
  } else {
    throw std::invalid_argument("unknown built-in function '" + fn + "'");
  }
  return t;
}

Dths pendulum(const Rational& F, const Rational& T) {
  Dths h;
  Rational x1max = Rational::from_string("3.4557519");  // 1.1 pi
  h.state.push_back(continuous_var("x1", -x1max, x1max));
  h.state.push_back(continuous_var("x2", Rational(-4), Rational(4)));
  h.input.push_back(discrete_var("u", Rational(-1), Rational(1)));
  h.periodic["x1"] = Rational(2) * pi_over();

  // x1' = x1 + T x2
  LinearExpr e1 = LinearExpr::variable("x1'");
  e1.add_term("x1", Rational(-1));
  e1.add_term("x2", -T);
  h.linear_items.push_back({std::nullopt, make_eq(std::move(e1), Rational(0))});

  // T sin(x1) + (x2 + T F u - x2') = 0
  NonlinearItem it;
  it.coeff = T;
  it.term = builtin_term("sin", "x1");
  it.linear = LinearExpr::variable("x2");
  it.linear.add_term("u", T * F);
  it.linear.add_term("x2'", Rational(-1));
  it.sense = Sense::Eq;
  it.bound = Rational(0);
  h.nonlinear_items.push_back(std::move(it));
  h.validate();
  return h;
}

ControlProblem pendulum_problem(const Rational& rho) {
  ControlProblem cp;
  Rational x1max = Rational::from_string("3.4557519");
  std::vector<Var> sv = {continuous_var("x1", -x1max, x1max),
                         continuous_var("x2", Rational(-4), Rational(4))};
  cp.initial.vars = sv;
  cp.initial.items.push_back(make_ge(LinearExpr::variable("x1"), -pi_over()));
  cp.initial.items.push_back(make_le(LinearExpr::variable("x1"), pi_over()));
  cp.initial.items.push_back(make_ge(LinearExpr::variable("x2"), Rational(-4)));
  cp.initial.items.push_back(make_le(LinearExpr::variable("x2"), Rational(4)));
  cp.goal.vars = sv;
  cp.goal.items.push_back(make_ge(LinearExpr::variable("x1"), -rho));
  cp.goal.items.push_back(make_le(LinearExpr::variable("x1"), rho));
  cp.goal.items.push_back(make_ge(LinearExpr::variable("x2"), -rho));
  cp.goal.items.push_back(make_le(LinearExpr::variable("x2"), rho));
  return cp;
}

Dths ex2(const Rational& T) {
  Dths h;
  h.state.push_back(continuous_var("x", Rational(-2), Rational(5, 2)));
  h.input.push_back(boolean_var("u"));

  // !u -> x' = x + (5/4 - x) T, i.e. x' - (1 - T) x = (5/4) T
  LinearExpr off = LinearExpr::variable("x'");
  off.add_term("x", T - Rational(1));
  h.linear_items.push_back({Guard{"u", false}, make_eq(std::move(off), Rational(5, 4) * T)});

  // u -> x' = x + (x - 3/2) T, i.e. x' - (1 + T) x = -(3/2) T
  LinearExpr on = LinearExpr::variable("x'");
  on.add_term("x", -(Rational(1) + T));
  h.linear_items.push_back({Guard{"u", true}, make_eq(std::move(on), Rational(-3, 2) * T)});
  h.validate();
  return h;
}

ControlProblem ex2_problem() {
  ControlProblem cp;
  std::vector<Var> sv = {continuous_var("x", Rational(-2), Rational(5, 2))};
  cp.initial.vars = sv;
  cp.initial.items.push_back(make_ge(LinearExpr::variable("x"), Rational(-2)));
  cp.initial.items.push_back(make_le(LinearExpr::variable("x"), Rational(5, 2)));
  cp.goal.vars = sv;
  cp.goal.items.push_back(make_eq(LinearExpr::variable("x"), Rational(0)));
  return cp;
}

}  // namespace qsynth
