#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "qsynth/quantize.hpp"

using namespace qsynth;

TEST_CASE("floor quantization maps") {
  QuantMap m = QuantMap::floor_scale(Rational(-2), Rational(5, 2), Rational(1));
  CHECK(*m.level_of(Rational(19, 10)) == 1);
  CHECK(m.min_level() == -2);
  CHECK(m.level_count() == 5);  // [-2,-1) .. [2, 2.5]

  QuantMap m8 = QuantMap::floor_scale(Rational(-2), Rational(5, 2), Rational(8));
  CHECK(*m8.level_of(Rational(5, 4)) == 10);
  CHECK(m8.min_level() == -16);
  CHECK(m8.level_count() == 36);
  CHECK(*m8.level_of(Rational(5, 2)) == 19);  // top edge folds into the last cell
}

TEST_CASE("uniform quantization maps") {
  QuantMap m = QuantMap::uniform(Rational(-4), Rational(4), 3);
  CHECK(*m.level_of(Rational(-4)) == 0);
  CHECK(*m.level_of(Rational(4)) == 7);
  CHECK(m.step() == Rational(1));
  CHECK_FALSE(m.level_of(Rational(5)).has_value());
  auto c0 = m.cell(0);
  CHECK(c0.first == Rational(-4));
  CHECK(c0.second == Rational(-3));
}

TEST_CASE("cell boxes") {
  QuantMap m8 = QuantMap::floor_scale(Rational(-2), Rational(5, 2), Rational(8));
  auto c = m8.cell(10);
  CHECK(c.first == Rational(10, 8));
  CHECK(c.second == Rational(11, 8));
  QuantMap d = QuantMap::discrete_identity(Rational(-1), Rational(1));
  auto cd = d.cell(1);
  CHECK(cd.first == Rational(1));
  CHECK(cd.second == Rational(1));
  CHECK(d.step() == Rational(0));
  CHECK_THROWS(d.cell(2));
}

TEST_CASE("quantization step is the max over maps") {
  Quantization q;
  q.maps.push_back({"x1", QuantMap::uniform(Rational::from_string("-3.4557519"),
                                            Rational::from_string("3.4557519"), 8)});
  q.maps.push_back({"x2", QuantMap::uniform(Rational(-4), Rational(4), 8)});
  q.maps.push_back({"u", QuantMap::discrete_identity(Rational(-1), Rational(1))});
  CHECK(q.step() == Rational(8, 256));  // the x2 map dominates
}

TEST_CASE("quantize and outside results") {
  Quantization q;
  q.maps.push_back({"x", QuantMap::uniform(Rational(-4), Rational(4), 3)});
  auto s = quantize(q, {"x"}, {{"x", Rational(-4)}});
  REQUIRE(s.has_value());
  CHECK(s->levels[0] == 0);
  CHECK_FALSE(quantize(q, {"x"}, {{"x", Rational(9, 2)}}).has_value());
  CHECK_THROWS(quantize(q, {"x"}, {{"y", Rational(0)}}));
}

TEST_CASE("monotone componentwise") {
  std::mt19937_64 rng(555);
  QuantMap m = QuantMap::uniform(Rational(-3), Rational(5), 5);
  for (int i = 0; i < 200; ++i) {
    Rational a(static_cast<long>(rng() % 1600) - 600, 100);
    Rational b(static_cast<long>(rng() % 1600) - 600, 100);
    if (a < Rational(-3) || a > Rational(5) || b < Rational(-3) || b > Rational(5)) continue;
    if (a > b) std::swap(a, b);
    CHECK(*m.level_of(a) <= *m.level_of(b));
  }
}

TEST_CASE("cell centers round-trip") {
  QuantMap maps[] = {QuantMap::uniform(Rational(-4), Rational(4), 4),
                     QuantMap::floor_scale(Rational(-2), Rational(5, 2), Rational(8)),
                     QuantMap::discrete_identity(Rational(-2), Rational(3))};
  for (const auto& m : maps) {
    for (long k = m.min_level(); k < m.min_level() + m.level_count(); ++k) {
      auto [lo, hi] = m.cell(k);
      Rational mid = (lo + hi) / Rational(2);
      CHECK(*m.level_of(mid) == k);
    }
  }
}

TEST_CASE("uniform step law") {
  for (int b = 1; b <= 10; ++b) {
    QuantMap m = QuantMap::uniform(Rational(-4), Rational(4), b);
    CHECK(m.step() == Rational(8) / Rational(1L << b));
    // measured max cell width equals the step
    Rational w(0);
    for (long k = 0; k < m.level_count(); ++k) {
      auto [lo, hi] = m.cell(k);
      w = max(w, hi - lo);
    }
    CHECK(w == m.step());
  }
}

TEST_CASE("goal relaxation loosens continuous bounds only") {
  ConjunctivePredicate g;
  g.vars = {continuous_var("x", Rational(-2), Rational(2)),
            discrete_var("k", Rational(0), Rational(3))};
  g.items.push_back(make_eq(LinearExpr::variable("x"), Rational(0)));
  g.items.push_back(make_le(LinearExpr::variable("k"), Rational(2)));
  ConjunctivePredicate r = relax_goal(g, Rational(1, 10));
  REQUIRE(r.items.size() == 3);  // equality split into two range bounds
  CHECK(r.items[0].sense == Sense::Le);
  CHECK(r.items[0].bound == Rational(1, 10));
  CHECK(r.items[1].sense == Sense::Ge);
  CHECK(r.items[1].bound == Rational(-1, 10));
  CHECK(r.items[2].bound == Rational(2));  // discrete coordinate untouched

  ConjunctivePredicate same = relax_goal(g, Rational(0));
  CHECK(same.items.size() == g.items.size());
}

TEST_CASE("box goal relaxation matches the worked setup") {
  Rational rho(1, 10), eps(1, 32);
  ConjunctivePredicate g;
  g.vars = {continuous_var("x1", Rational(-4), Rational(4)),
            continuous_var("x2", Rational(-4), Rational(4))};
  g.items.push_back(make_ge(LinearExpr::variable("x1"), -rho));
  g.items.push_back(make_le(LinearExpr::variable("x1"), rho));
  g.items.push_back(make_ge(LinearExpr::variable("x2"), -rho));
  g.items.push_back(make_le(LinearExpr::variable("x2"), rho));
  ConjunctivePredicate r = relax_goal(g, eps);
  CHECK(r.items[0].bound == -(rho + eps));
  CHECK(r.items[1].bound == rho + eps);
  CHECK(r.items[2].bound == -(rho + eps));
  CHECK(r.items[3].bound == rho + eps);
}
