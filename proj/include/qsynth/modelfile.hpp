/*
 * modelfile.hpp
 *
 * Text format for models and LP debug problems. A model file has five
 * kinds of lines (comments start with '#'):
 *
 *   param NAME = RATIONAL
 *   var NAME (state|input|aux) (continuous|discrete|boolean) [LO, HI]
 *       [periodic=RATIONAL]
 *   transition [g ->|!g ->] EXPR (<=|>=|=) EXPR [(<=) EXPR]
 *   init / goal EXPR (<=|>=|=) EXPR [(<=) EXPR]
 *   quantize NAME (bits=N | floor=K) [range=[LO, HI]]
 *
 * Expressions are linear combinations of variables with rational
 * constants (decimals allowed), plus at most one built-in call
 * (sin/cos/sq) of a single variable per constraint. Parameters are
 * substituted as constants and may be overridden programmatically.
 */

#ifndef QSYNTH_MODELFILE_HPP
#define QSYNTH_MODELFILE_HPP

#include <map>
#include <optional>
#include <string>

#include "qsynth/milp.hpp"
#include "qsynth/model.hpp"
#include "qsynth/quantize.hpp"

namespace qsynth {

struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

struct ParsedModel {
  Dths system;
  ControlProblem problem;
  Quantization quant;
  std::map<std::string, Rational> params;

  Rational param_or(const std::string& name, const Rational& dflt) const;
};

ParsedModel parse_model(const std::string& text,
                        const std::map<std::string, Rational>& overrides = {});
ParsedModel parse_model_file(const std::string& path,
                             const std::map<std::string, Rational>& overrides = {});

// canonical round-trippable rendering
std::string print_model(const ParsedModel& m);

// LP debug files: var lines as above, one objective line
// (minimize EXPR | maximize EXPR | feasibility), then constraint lines.
MilpProblem parse_lp(const std::string& text);
MilpProblem parse_lp_file(const std::string& path);

}  // namespace qsynth

#endif  // QSYNTH_MODELFILE_HPP
