/*
 * quantize.hpp
 *
 * Quantizations: per-variable non-decreasing maps from bounded intervals
 * onto bounded integer level ranges, the admissible region they induce,
 * the quantization step, and goal relaxation by a ball of radius eps on
 * the continuous coordinates.
 *
 * Boundary convention: cells are left-closed right-open except the last
 * cell of each map, which is closed; quantize is total on the admissible
 * region and cell boxes cover it with measure-zero overlaps.
 */

#ifndef QSYNTH_QUANTIZE_HPP
#define QSYNTH_QUANTIZE_HPP

#include <optional>
#include <string>
#include <vector>

#include "qsynth/predicates.hpp"

namespace qsynth {

enum class QuantKind { Uniform, FloorScale, DiscreteIdentity };

class QuantMap {
 public:
  // uniform b-bit map on [lo, hi]: 2^b equal cells
  static QuantMap uniform(Rational lo, Rational hi, int bits);
  // gamma(x) = floor(scale * x) on [lo, hi]
  static QuantMap floor_scale(Rational lo, Rational hi, Rational scale);
  // identity on a bounded integer interval
  static QuantMap discrete_identity(Rational lo, Rational hi);

  QuantKind kind() const { return kind_; }
  const Rational& lo() const { return lo_; }
  const Rational& hi() const { return hi_; }
  int bits() const { return bits_; }

  long min_level() const { return min_level_; }
  long level_count() const { return count_; }
  // sup width of a preimage cell
  Rational step() const;

  // level of a value inside [lo, hi]; nullopt when outside
  std::optional<long> level_of(const Rational& v) const;
  // closed cell of a level, intersected with the domain; throws on bad level
  std::pair<Rational, Rational> cell(long level) const;

 private:
  QuantKind kind_ = QuantKind::Uniform;
  Rational lo_, hi_;
  int bits_ = 0;       // uniform
  Rational scale_;     // floor_scale
  Rational width_;     // uniform cell width
  long min_level_ = 0;
  long count_ = 0;
};

struct AbstractState {
  std::vector<long> levels;
  auto operator<=>(const AbstractState&) const = default;
};
using AbstractAction = AbstractState;

// A + Gamma of a quantization: ordered per-variable maps; the map domain
// is the variable's admissible interval.
struct Quantization {
  std::vector<std::pair<std::string, QuantMap>> maps;

  const QuantMap& map_of(const std::string& var) const;
  bool has(const std::string& var) const;
  // ||Gamma||: max over maps of the sup cell width
  Rational step() const;
};

// componentwise application over `vars` order; nullopt = outside A
std::optional<AbstractState> quantize(const Quantization& q, const std::vector<std::string>& vars,
                                      const Valuation& v);
// closed hyperinterval mapping to s (same variable order)
std::vector<std::pair<Rational, Rational>> cell_box(const Quantization& q,
                                                    const std::vector<std::string>& vars,
                                                    const AbstractState& s);

// B_eps(G): each constraint bound loosened by eps * (sum |coeff| over
// continuous variables); discrete coordinates untouched. G must be
// conjunctive over state variables.
ConjunctivePredicate relax_goal(const ConjunctivePredicate& goal, const Rational& eps);

}  // namespace qsynth

#endif  // QSYNTH_QUANTIZE_HPP
