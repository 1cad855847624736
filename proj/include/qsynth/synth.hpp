/*
 * synth.hpp
 *
 * The synthesis engine: builds the finite quantized abstraction of a
 * linear hybrid system (successor cells per state/action cell, certified
 * by exact MILP queries) and computes the most-general time-optimal
 * strong controller by a backward fixpoint over layers.
 *
 * Abstraction notes:
 *  - a (state, action) pair is dropped when infeasible, and marked
 *    unusable when its image can leave the admissible region: a strong
 *    controller must keep trajectories where it is defined;
 *  - a confirmed self-successor is removed when the stationarity system
 *    N and x' = x is infeasible over the cell: a run that stays inside a
 *    closed convex cell forever under one action has a Cesaro-average
 *    fixpoint in the cell, so no stationary point means the self-loop is
 *    transient and cannot block progress;
 *  - next-state variables that are not periodic get their bounds widened
 *    during image computation so genuine exits from the admissible
 *    region are visible; periodic (angle) variables re-enter through
 *    their wrap auxiliaries instead.
 */

#ifndef QSYNTH_SYNTH_HPP
#define QSYNTH_SYNTH_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qsynth/model.hpp"
#include "qsynth/quantize.hpp"

namespace qsynth {

struct AbstractionEntry {
  AbstractState state;
  AbstractAction action;
  std::vector<AbstractState> successors;
};

enum class PairStatus : uint8_t { Inadmissible = 0, Unusable = 1, Usable = 2 };

// Packed-index layout shared by abstractions and controllers.
struct StateLayout {
  std::vector<std::string> vars;
  std::vector<long> min_level;
  std::vector<long> count;

  long size() const;
  long pack(const AbstractState& s) const;
  AbstractState unpack(long idx) const;
  bool contains(const AbstractState& s) const;
};

struct AbstractionTable {
  StateLayout states;
  StateLayout actions;
  std::vector<PairStatus> status;           // nstates * nactions
  std::vector<std::vector<int32_t>> succ;   // packed successor lists, sorted

  long nstates() const { return states.size(); }
  long nactions() const { return actions.size(); }
  long pair(long s, long a) const { return s * actions.size() + a; }
};

struct SynthOptions {
  int threads = 0;       // 0 = hardware concurrency
  bool verbose = false;  // progress notes on stderr
};

// Full abstraction pass: for every admissible (cell, action), the image
// bounding box via exact optimization, candidate successor cells
// overlapping it, and individual feasibility confirmation per candidate.
AbstractionTable abstract_system(const Dtlhs& sys, const Quantization& q,
                                 const SynthOptions& opt = {});

// Explicit finite LTS adapter, for oracles and property tests.
AbstractionTable abstraction_from_lts(const ExplicitLts& l);

constexpr uint32_t kNotInDom = 0xffffffffu;

struct Controller {
  StateLayout states;
  StateLayout actions;
  std::vector<uint32_t> layer;     // 0 = abstract goal; kNotInDom = outside dom(K)
  std::vector<uint64_t> enabled;   // action bitmap per state

  bool in_dom(long s) const { return layer[s] != kNotInDom && enabled[s] != 0; }
  // deterministic tie-break for the emitted control law: lowest action index
  std::optional<long> chosen_action(long s) const;
};

struct SynthesisReport {
  long goal_cells = 0;
  long dom_size = 0;
  long max_layer = 0;
  bool i_covered = false;
  long i_cells = 0;
  long i_cells_covered = 0;
  long pairs_admissible = 0;
  long pairs_usable = 0;
  double abstraction_seconds = 0.0;
  double fixpoint_seconds = 0.0;

  std::string to_string() const;
};

// Backward fixpoint: D_0 = goal cells; D_{k+1} adds states with a usable
// action whose nonempty successor set lies in D_k; layer = first k; the
// enabled set of a layer-k state holds every usable action whose
// successors all sit strictly below k. Goal cells enable the actions
// that keep the loop inside the goal when such actions exist, otherwise
// the actions that re-enter the domain optimally.
Controller solve_strong(const AbstractionTable& abs, const std::vector<uint8_t>& goal,
                        const std::vector<uint8_t>& init, SynthesisReport* report = nullptr);

// Exact worst-case distance to the goal over a finite LTS: +infinity
// (nullopt) when some adversarial fullpath avoids the goal or deadlocks.
std::optional<long> j_strong_oracle(const ExplicitLts& l, const std::set<int>& goal, int s);

// Cell marking against conjunctive state predicates. Exact for interval
// (single-variable) constraints; conservative otherwise.
std::vector<uint8_t> mark_cells_contained(const ConjunctivePredicate& region,
                                          const Quantization& q, const StateLayout& layout);
std::vector<uint8_t> mark_cells_intersecting(const ConjunctivePredicate& region,
                                             const Quantization& q, const StateLayout& layout);

// Builds the packed layouts for a system under a quantization.
StateLayout state_layout(const Dtlhs& sys, const Quantization& q);
StateLayout action_layout(const Dtlhs& sys, const Quantization& q);

// versioned binary controller dump: per-state layer + enabled bitmap
void save_controller(const Controller& k, std::ostream& os);
Controller load_controller(std::istream& is);

// region export: one row per state in dom(K) with its box and actions
void write_region_csv(const Controller& k, const Quantization& q, std::ostream& os);

}  // namespace qsynth

#endif  // QSYNTH_SYNTH_HPP
