/*
 * builtins.hpp
 *
 * Built-in nonlinear functions (sin, cos, sq) and the two bundled
 * benchmark systems: the inverted pendulum with stationary pivot point
 * and the one-dimensional switched system from the worked examples.
 */

#ifndef QSYNTH_BUILTINS_HPP
#define QSYNTH_BUILTINS_HPP

#include "qsynth/model.hpp"

namespace qsynth {

// rational stand-ins for pi: upper 355/113, lower 314159/100000
const Rational& pi_over();
const Rational& pi_under();

// Builds a NonlinearTerm for a unary built-in applied to `arg`.
// Supported: "sin", "cos", "sq". Throws on anything else.
NonlinearTerm builtin_term(const std::string& fn, const std::string& arg);
bool is_builtin_fn(const std::string& fn);

// Inverted pendulum (normalized g/l = 1, 1/(m l^2) = 1):
//   x1' = x1 + T x2
//   x2' = x2 + T sin(x1) + T F u,   u in {-1, 0, 1}
// admissible region x1 in [-1.1 pi, 1.1 pi] (periodic), x2 in [-4, 4].
Dths pendulum(const Rational& F, const Rational& T);

// Goal/initial regions for the pendulum per the experimental setup:
// G = [-rho, rho]^2, I = [-pi, pi] x [-4, 4].
ControlProblem pendulum_problem(const Rational& rho);

// One-dimensional example system:
//   !u -> x' = x + (5/4 - x) T
//    u -> x' = x + (x - 3/2) T
// with x in [-2, 5/2], u boolean; I = [-2, 5/2], G = (x = 0).
Dths ex2(const Rational& T);
ControlProblem ex2_problem();

}  // namespace qsynth

#endif  // QSYNTH_BUILTINS_HPP
