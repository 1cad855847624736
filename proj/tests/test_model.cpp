#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qsynth/builtins.hpp"
#include "qsynth/linearize.hpp"
#include "qsynth/model.hpp"

using namespace qsynth;

TEST_CASE("pendulum step accepts the Euler image") {
  Dths h = pendulum(Rational(1, 2), Rational(1, 10));
  double x1 = 3.14159, x2 = 0.0;
  Valuation x{{"x1", Rational::from_double(x1)}, {"x2", Rational::from_double(x2)}};
  Valuation u{{"u", Rational(0)}};
  Valuation xp{{"x1", Rational::from_double(x1 + 0.1 * x2)},
               {"x2", Rational::from_double(x2 + 0.1 * std::sin(x1))}};
  CHECK(lts_step(h, x, u, xp));
  // perturbed image is rejected
  Valuation bad = xp;
  bad["x2"] = Rational::from_double(x2 + 0.1 * std::sin(x1) + 0.01);
  CHECK_FALSE(lts_step(h, x, u, bad));
}

TEST_CASE("switched example has its fixpoint at 5/4") {
  Dths h = ex2(Rational(1, 10));
  CHECK(lts_step(h, {{"x", Rational(5, 4)}}, {{"u", Rational(0)}}, {{"x", Rational(5, 4)}}));
  CHECK_FALSE(lts_step(h, {{"x", Rational(5, 4)}}, {{"u", Rational(1)}}, {{"x", Rational(5, 4)}}));
}

TEST_CASE("out-of-bounds next state is not a transition") {
  Dths h = ex2(Rational(1, 10));
  CHECK_FALSE(lts_step(h, {{"x", Rational(2)}}, {{"u", Rational(0)}}, {{"x", Rational(3)}}));
}

TEST_CASE("auxiliary variables need a witness") {
  Dths h = ex2(Rational(1, 10));
  h.aux.push_back(continuous_var("y", Rational(0), Rational(1)));
  CHECK_THROWS(lts_step(h, {{"x", Rational(0)}}, {{"u", Rational(0)}}, {{"x", Rational(1, 8)}}));
  // with the witness supplied the check goes through
  Valuation y{{"y", Rational(0)}};
  CHECK(lts_step(h, {{"x", Rational(0)}}, {{"u", Rational(0)}}, {{"x", Rational(1, 8)}}, y));
}

TEST_CASE("linearized step decided by exact feasibility") {
  Dths h = ex2(Rational(1, 10));
  LinearizationResult lin = linearize(h, {});
  CHECK(lts_step(lin.system, {{"x", Rational(1)}}, {{"u", Rational(1)}}, {{"x", Rational(19, 20)}}));
  CHECK_FALSE(lts_step(lin.system, {{"x", Rational(1)}}, {{"u", Rational(1)}}, {{"x", Rational(1)}}));
}

TEST_CASE("admissible actions and images are set comprehensions") {
  ExplicitLts l;
  l.nstates = 3;
  l.nactions = 2;
  l.add(0, 0, 1);
  CHECK(l.adm(0) == std::set<int>{0});
  CHECK(l.img(0, 0) == std::set<int>{1});
  CHECK(l.adm(2).empty());
  l.add(0, 0, 2);
  CHECK(l.img(0, 0) == std::set<int>{1, 2});
  CHECK_THROWS(l.adm(5));
}

TEST_CASE("refinement is transition-set inclusion") {
  ExplicitLts a, b;
  a.nstates = b.nstates = 2;
  a.nactions = b.nactions = 1;
  a.add(0, 0, 1);
  b.add(0, 0, 1);
  b.add(1, 0, 0);
  CHECK(refines(a, a));
  CHECK(refines(a, b));
  CHECK_FALSE(refines(b, a));
  ExplicitLts c;
  c.nstates = 3;
  c.nactions = 1;
  CHECK_THROWS(refines(a, c));
}

TEST_CASE("refinement is a partial order on random systems") {
  std::mt19937_64 rng(31337);
  for (int iter = 0; iter < 50; ++iter) {
    int n = 2 + static_cast<int>(rng() % 5);
    int na = 1 + static_cast<int>(rng() % 3);
    auto random_lts = [&]() {
      ExplicitLts l;
      l.nstates = n;
      l.nactions = na;
      int edges = static_cast<int>(rng() % (n * na));
      for (int e = 0; e < edges; ++e) {
        l.add(static_cast<int>(rng() % n), static_cast<int>(rng() % na),
              static_cast<int>(rng() % n));
      }
      return l;
    };
    ExplicitLts l1 = random_lts(), l2 = random_lts(), l3 = random_lts();
    CHECK(refines(l1, l1));  // reflexive
    if (refines(l1, l2) && refines(l2, l1)) CHECK(l1.transitions == l2.transitions);
    if (refines(l1, l2) && refines(l2, l3)) CHECK(refines(l1, l3));
  }
}
