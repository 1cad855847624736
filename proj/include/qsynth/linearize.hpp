/*
 * linearize.hpp
 *
 * Builds a linear hybrid system overapproximating a nonlinear one: each
 * nonlinear term gets a piecewise-linear envelope (per-cell lower/upper
 * lines), a fresh real carries the term's value, boolean selectors pick
 * the active cell, and periodic state variables get wrap auxiliaries.
 *
 * Envelope soundness is certified by dense sampling with a safety margin
 * folded into the stored lines, not by symbolic proof; the margin and
 * sampling density are recorded in the result.
 */

#ifndef QSYNTH_LINEARIZE_HPP
#define QSYNTH_LINEARIZE_HPP

#include <map>
#include <string>
#include <vector>

#include "qsynth/model.hpp"

namespace qsynth {

struct EnvelopeCell {
  Box cell;                                 // hyperinterval over the real args
  std::vector<Rational> lo_slope, hi_slope; // one slope per real arg
  Rational lo_const, hi_const;              // f-(r) = lo_slope . r + lo_const
};

struct PwlEnvelope {
  std::string term_id;
  std::vector<long> w;  // discrete case; empty when the term has no W
  std::vector<EnvelopeCell> cells;
  Rational margin;      // safety margin already folded into the lines
  int sample_density = 1000;

  // interval hull of the envelope over all cells (bounds for the fresh real)
  std::pair<Rational, Rational> value_hull() const;
};

// Largest violation of f-(r) <= f(r) <= f+(r) on a sampling grid, in
// doubles; <= 0 means the check passed at this density.
double envelope_violation(const PwlEnvelope& env, const NonlinearTerm& term,
                          const std::vector<long>& w);
// max over cells of sup (f+ - f-), sampled
double envelope_gap(const PwlEnvelope& env);

enum class SinMode {
  Paper,  // coefficients rounded to 4 decimals, as printed in the source construction
  Tight,  // full-precision secant/tangent coefficients
};

// The 4-interval (or n-interval, n even) envelope of sin on [-pi, pi]:
// on convex spans the secant bounds from above and the midpoint tangent
// from below; roles swap where the curvature flips. pi is the rational
// over-approximation 355/113 so the wrap constraint stays conservative.
PwlEnvelope sin_envelope(int ncells = 4, SinMode mode = SinMode::Paper,
                         const Rational& margin = Rational(1, 1000000000));

// Degree-1 Taylor envelope at cell centers with Lagrange remainder bounds
// from the term's hessian_range. Requires smoothness C2.
PwlEnvelope taylor_envelope(const NonlinearTerm& term, const std::vector<Box>& cells,
                            const std::vector<long>& w = {},
                            const Rational& margin = Rational(1, 1000000000));
// n equal cells over an interval (helper for 1-D terms)
std::vector<Box> split_interval(const Rational& lo, const Rational& hi, int n);

struct LinearizationResult {
  Dtlhs system;
  std::vector<std::string> fresh_reals;
  std::vector<std::string> fresh_integers;
  std::vector<std::string> fresh_booleans;
  std::map<std::string, std::string> provenance;  // fresh var -> what it stands for
  Rational margin;
};

// Replaces every nonlinear item of h by its envelope encoding; a Dths
// with no nonlinear items passes through with N unchanged. Envelopes are
// re-checked by sampling here; a violating envelope is an error.
LinearizationResult linearize(const Dths& h, const std::map<std::string, PwlEnvelope>& envelopes);

// Builds default envelopes for every nonlinear term of h (sin/cos get the
// secant/tangent construction, anything else C2 the Taylor construction).
std::map<std::string, PwlEnvelope> default_envelopes(const Dths& h, int ncells, SinMode mode,
                                                     const Rational& margin);

}  // namespace qsynth

#endif  // QSYNTH_LINEARIZE_HPP
