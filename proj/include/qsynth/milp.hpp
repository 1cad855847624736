/*
 * milp.hpp
 *
 * Exact feasibility and optimization of bounded mixed-integer linear
 * programs over rationals. The LP core is a dictionary simplex with
 * Bland's rule (no floating point anywhere); integrality is handled by
 * best-first branch-and-bound on discrete/boolean variables, with an
 * interval-propagation presolve at every node.
 *
 * Problems here are tiny (tens of variables) but the synthesis engine
 * issues millions of them, so MilpEngine keeps a compiled, index-based
 * form of a predicate that can be re-solved under per-query bound
 * patches without touching any string maps.
 */

#ifndef QSYNTH_MILP_HPP
#define QSYNTH_MILP_HPP

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsynth/predicates.hpp"

namespace qsynth {

enum class MilpDirection { Minimize, Maximize, Feasibility };
enum class MilpStatus { Optimal, Infeasible };

struct MilpProblem {
  ConjunctivePredicate predicate;
  LinearExpr objective;  // ignored in feasibility mode
  MilpDirection direction = MilpDirection::Feasibility;
};

struct MilpResult {
  MilpStatus status = MilpStatus::Infeasible;
  std::optional<Rational> value;
  std::optional<Valuation> witness;
};

MilpResult solve(const MilpProblem& p);

// Per-target exact (min, max); empty optional when the predicate is
// infeasible. Issues 2*|targets| optimizations.
std::optional<std::map<std::string, std::pair<Rational, Rational>>> optimize_box(
    const ConjunctivePredicate& p, const std::vector<std::string>& targets);

// --- compiled engine -------------------------------------------------------

class MilpEngine {
 public:
  explicit MilpEngine(const ConjunctivePredicate& p);

  int col(const std::string& name) const;  // throws on unknown name
  int ncols() const { return static_cast<int>(cols_.size()); }
  const std::string& col_name(int c) const { return cols_[c].name; }

  // Extra constraint rows (over the same variables) that individual
  // queries can switch on, e.g. stationarity x' = x.
  int add_row_group(const std::vector<Constraint>& rows);

  struct Query {
    // per-column bound overrides, applied over the predicate defaults
    std::vector<std::pair<int, std::pair<Rational, Rational>>> bounds;
    std::vector<int> row_groups;  // active extra groups
  };

  std::optional<std::vector<Rational>> feasible(const Query& q) const;
  // (min, max) of a column; nullopt when infeasible
  std::optional<std::pair<Rational, Rational>> column_range(int c, const Query& q) const;
  // single-direction optimum of a dense objective over columns
  struct OptResult { Rational value; std::vector<Rational> x; };
  std::optional<OptResult> optimize(const std::vector<Rational>& obj, bool maximize,
                                    const Query& q) const;

  // compiled internal forms (exposed for the solver kernel)
  struct Col {
    std::string name;
    bool integral = false;
    Rational lo, hi;
  };
  struct Row {
    std::vector<std::pair<int, Rational>> terms;
    Sense sense = Sense::Le;
    Rational rhs;
  };

 private:
  std::vector<Col> cols_;
  std::vector<Row> base_rows_;
  std::vector<std::vector<Row>> groups_;
  std::map<std::string, int> index_;
};

}  // namespace qsynth

#endif  // QSYNTH_MILP_HPP
