/*
 * predicates.hpp
 *
 * Linear-arithmetic constraint algebra over bounded typed variables:
 * linear expressions, constraints, guarded constraints, and the
 * guarded -> conjunctive big-M elimination. Everything is exact and
 * immutable after construction.
 */

#ifndef QSYNTH_PREDICATES_HPP
#define QSYNTH_PREDICATES_HPP

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsynth/rational.hpp"

namespace qsynth {

enum class VarKind { Continuous, Discrete, Boolean };

struct Var {
  std::string name;
  VarKind kind = VarKind::Continuous;
  Rational lower;
  Rational upper;

  // checks lower <= upper, boolean in {0,1}, discrete integer bounds
  void validate() const;
};

Var continuous_var(std::string name, Rational lo, Rational hi);
Var discrete_var(std::string name, Rational lo, Rational hi);
Var boolean_var(std::string name);

using Valuation = std::map<std::string, Rational>;

// Sparse linear combination of variables plus a constant. Terms are kept
// sorted by name with no zero coefficients.
class LinearExpr {
 public:
  LinearExpr() = default;
  explicit LinearExpr(Rational constant) : constant_(std::move(constant)) {}
  static LinearExpr variable(const std::string& name);

  const std::vector<std::pair<std::string, Rational>>& terms() const { return terms_; }
  const Rational& constant() const { return constant_; }
  Rational coeff(const std::string& name) const;
  bool is_constant() const { return terms_.empty(); }

  void add_term(const std::string& name, const Rational& c);
  void add_constant(const Rational& c) { constant_ += c; }

  LinearExpr& operator+=(const LinearExpr& o);
  LinearExpr& operator-=(const LinearExpr& o);
  LinearExpr& operator*=(const Rational& c);
  friend LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
  friend LinearExpr operator-(LinearExpr a, const LinearExpr& b) { return a -= b; }
  friend LinearExpr operator*(LinearExpr a, const Rational& c) { return a *= c; }
  LinearExpr operator-() const;

  Rational eval(const Valuation& v) const;
  std::string to_string() const;

 private:
  std::vector<std::pair<std::string, Rational>> terms_;
  Rational constant_;
};

enum class Sense { Le, Ge, Eq };

struct Constraint {
  LinearExpr expr;
  Sense sense = Sense::Le;
  Rational bound;

  bool holds(const Valuation& v) const;
  std::string to_string() const;
};

inline Constraint make_le(LinearExpr e, Rational b) { return {std::move(e), Sense::Le, std::move(b)}; }
inline Constraint make_ge(LinearExpr e, Rational b) { return {std::move(e), Sense::Ge, std::move(b)}; }
inline Constraint make_eq(LinearExpr e, Rational b) { return {std::move(e), Sense::Eq, std::move(b)}; }

struct Guard {
  std::string var;       // boolean-kind variable
  bool positive = true;  // false encodes "!g -> ..."
};

struct GuardedConstraint {
  std::optional<Guard> guard;
  Constraint body;
};

struct GuardedPredicate {
  std::vector<Var> vars;
  std::vector<GuardedConstraint> items;

  const Var* find_var(const std::string& name) const;
  void validate() const;  // every mentioned variable appears in vars, guards boolean
};

struct ConjunctivePredicate {
  std::vector<Var> vars;
  std::vector<Constraint> items;

  const Var* find_var(const std::string& name) const;
  GuardedPredicate as_guarded() const;
};

// true iff every item holds under v; a guarded item holds whenever its
// guard polarity is unmet. Throws if v misses a variable of p.
bool evaluate(const GuardedPredicate& p, const Valuation& v);
bool evaluate(const ConjunctivePredicate& p, const Valuation& v);

// Exact (min, max) of e over the variable box. Throws on variables
// missing from `vars`.
std::pair<Rational, Rational> interval_bounds(const LinearExpr& e, const std::vector<Var>& vars);

// Big-M elimination: guard y -> (E <= b) becomes E <= b + M(1-y) with
// M = max(0, sup E - b) from interval bounds; requires bounded vars.
ConjunctivePredicate eliminate_guards(const GuardedPredicate& p);

}  // namespace qsynth

#endif  // QSYNTH_PREDICATES_HPP
