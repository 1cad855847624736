/*
 * model.hpp
 *
 * Hybrid system models and their transition-system semantics: DTHS
 * (possibly nonlinear transition predicate), DTLHS (guarded linear), the
 * finite explicit LTS used by oracles and tests, and control problems.
 *
 * Nonlinear terms are evaluable closures with metadata, not symbolic
 * expressions; model files can only combine the built-in functions.
 */

#ifndef QSYNTH_MODEL_HPP
#define QSYNTH_MODEL_HPP

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qsynth/milp.hpp"
#include "qsynth/predicates.hpp"

namespace qsynth {

// --- nonlinear terms --------------------------------------------------------

struct Box {
  // per-variable closed interval, ordered like the owning arg list
  std::vector<std::pair<Rational, Rational>> iv;
};

enum class Smoothness { C2, Unknown };

struct NonlinearTerm {
  std::string id;                          // e.g. "sin(x1)"
  std::string fn;                          // built-in name: sin | cos | sq
  std::vector<std::string> real_args;      // R
  std::vector<std::string> discrete_args;  // W
  std::function<double(const std::vector<double>&, const std::vector<long>&)> eval;
  Smoothness smoothness = Smoothness::Unknown;
  // remainder bounds of the degree-1 Taylor expansion at the cell center,
  // i.e. bounds of (1/2)(x-x0)^T H (x-x0) over the cell
  std::function<std::pair<Rational, Rational>(const Box&)> hessian_range;
};

// coeff * f(R,W) + linear(V) {<=,>=,=} bound
struct NonlinearItem {
  Rational coeff;
  NonlinearTerm term;
  LinearExpr linear;
  Sense sense = Sense::Eq;
  Rational bound;
};

// --- hybrid systems ---------------------------------------------------------

inline std::string primed(const std::string& name) { return name + "'"; }

struct Dths {
  std::vector<Var> state;  // X (continuous and discrete)
  std::vector<Var> input;  // U
  std::vector<Var> aux;    // Y
  std::vector<GuardedConstraint> linear_items;
  std::vector<NonlinearItem> nonlinear_items;
  // state variables that live on a circle, with their (rational) period;
  // the linearizer adds wrap auxiliaries for these
  std::map<std::string, Rational> periodic;

  std::vector<Var> next_state() const;        // X' with X's kinds and bounds
  std::vector<Var> all_vars() const;          // X u U u Y u X'
  bool is_linear() const { return nonlinear_items.empty(); }
  void validate() const;
};

struct Dtlhs {
  std::vector<Var> state;
  std::vector<Var> input;
  std::vector<Var> aux;
  GuardedPredicate transition;  // N over X u U u Y u X'
  std::map<std::string, Rational> periodic;

  std::vector<Var> next_state() const;
  void validate() const;
};

struct ControlProblem {
  ConjunctivePredicate initial;  // I over X
  ConjunctivePredicate goal;     // G over X
};

// One LTS step decision. For a Dtlhs this is exact MILP feasibility of N
// with x, u, x' fixed. For a Dths the existential over Y is not decided:
// callers must pass the auxiliary witness unless Y is empty.
bool lts_step(const Dtlhs& h, const Valuation& x, const Valuation& u, const Valuation& xp);
bool lts_step(const Dths& h, const Valuation& x, const Valuation& u, const Valuation& xp,
              const std::optional<Valuation>& y = std::nullopt);

// --- explicit finite LTS ----------------------------------------------------

struct ExplicitLts {
  int nstates = 0;
  int nactions = 0;
  std::set<std::tuple<int, int, int>> transitions;  // (s, a, s')

  void add(int s, int a, int sp);
  bool has(int s, int a, int sp) const { return transitions.count({s, a, sp}) > 0; }
  std::set<int> adm(int s) const;
  std::set<int> img(int s, int a) const;
};

// transition-set inclusion; throws on mismatched alphabets
bool refines(const ExplicitLts& l1, const ExplicitLts& l2);

}  // namespace qsynth

#endif  // QSYNTH_MODEL_HPP
