/*
 * codegen.hpp
 *
 * Emits the control software: ctrlRegion / ctrlLaw as standalone ISO C
 * built on a binary decision DAG over the concatenated bits of the
 * abstract state tuple (variable-major, most significant bit first,
 * identical subtrees emitted once), plus a flat binary lookup table.
 * Lookup depth is bounded by the total number of state bits.
 */

#ifndef QSYNTH_CODEGEN_HPP
#define QSYNTH_CODEGEN_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qsynth/synth.hpp"

namespace qsynth {

struct CodegenSpec {
  Controller controller;
  std::map<long, long long> action_commands;  // packed action -> command, injective
  long long fault_command = -9999;

  void validate() const;  // nonempty dom, injective encoding, fault distinct
};

// Commands for identity-quantized inputs: the command of an action is the
// level tuple packed back to its (single-variable) integer value; falls
// back to the packed action index for multi-variable inputs.
std::map<long, long long> natural_action_commands(const Controller& k);

struct DecisionDag {
  struct Node {
    int bit;      // tested bit position (0 = last bit in walk order)
    int lo, hi;   // child ids; negative id ~leaf encodes leaves
  };
  std::vector<Node> nodes;
  std::vector<long long> leaves;
  int root = 0;                 // node id or ~leaf
  int total_bits = 0;
  std::vector<int> var_bits;    // bits per state variable
  StateLayout states;
  long long fault = 0;

  // reference interpreter: walks the DAG exactly like the emitted C
  long long eval(const std::vector<long>& levels) const;
  int max_depth() const;
};

DecisionDag build_decision_dag(const CodegenSpec& spec);

// self-contained C source with ctrlRegion and ctrlLaw
std::string emit_c(const CodegenSpec& spec);

// flat binary table indexed by the packed abstract state
void emit_table(const CodegenSpec& spec, std::ostream& os);

struct ControlTable {
  StateLayout states;
  long long fault = 0;
  std::vector<long long> entries;

  long long lookup(const std::vector<long>& levels) const;
};

ControlTable load_table(std::istream& is);

}  // namespace qsynth

#endif  // QSYNTH_CODEGEN_HPP
