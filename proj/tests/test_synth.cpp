#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "qsynth/builtins.hpp"
#include "qsynth/linearize.hpp"
#include "qsynth/synth.hpp"

using namespace qsynth;

namespace {

ExplicitLts chain3() {
  // s0 -> s1 -> s2(goal), deterministic single action
  ExplicitLts l;
  l.nstates = 3;
  l.nactions = 1;
  l.add(0, 0, 1);
  l.add(1, 0, 2);
  l.add(2, 0, 2);
  return l;
}

struct Ex2Synth {
  Quantization q;
  AbstractionTable abs;
  Controller k;
  SynthesisReport rep;
};

Ex2Synth synth_ex2(const Rational& scale) {
  Ex2Synth out;
  Dths h = ex2(Rational(1, 10));
  LinearizationResult lin = linearize(h, {});
  out.q.maps.push_back({"x", QuantMap::floor_scale(Rational(-2), Rational(5, 2), scale)});
  out.q.maps.push_back({"u", QuantMap::discrete_identity(Rational(0), Rational(1))});
  out.abs = abstract_system(lin.system, out.q, {});
  ControlProblem cp = ex2_problem();
  auto goal = mark_cells_contained(relax_goal(cp.goal, out.q.step()), out.q, out.abs.states);
  auto init = mark_cells_intersecting(cp.initial, out.q, out.abs.states);
  out.k = solve_strong(out.abs, goal, init, &out.rep);
  return out;
}

}  // namespace

TEST_CASE("worst-case distance on a deterministic chain") {
  ExplicitLts l = chain3();
  CHECK(*j_strong_oracle(l, {2}, 0) == 2);
  CHECK(*j_strong_oracle(l, {2}, 1) == 1);
  // goal state with a self-loop action re-enters in one step
  CHECK(*j_strong_oracle(l, {2}, 2) == 1);
}

TEST_CASE("worst-case distance takes the sup over branches") {
  // s0 -a-> {s1, goal}, s1 -a-> {goal}
  ExplicitLts l;
  l.nstates = 3;
  l.nactions = 1;
  l.add(0, 0, 1);
  l.add(0, 0, 2);
  l.add(1, 0, 2);
  CHECK(*j_strong_oracle(l, {2}, 0) == 2);
}

TEST_CASE("deadlocks and unreachable goals have infinite distance") {
  ExplicitLts l;
  l.nstates = 3;
  l.nactions = 1;
  l.add(0, 0, 0);  // self loop, never reaches the goal
  CHECK_FALSE(j_strong_oracle(l, {2}, 0).has_value());
  CHECK_FALSE(j_strong_oracle(l, {2}, 1).has_value());  // deadlock
}

TEST_CASE("strong solution on a chain assigns layers") {
  ExplicitLts l = chain3();
  AbstractionTable abs = abstraction_from_lts(l);
  std::vector<uint8_t> goal = {0, 0, 1}, init = {1, 0, 0};
  SynthesisReport rep;
  Controller k = solve_strong(abs, goal, init, &rep);
  CHECK(k.layer[0] == 2);
  CHECK(k.layer[1] == 1);
  CHECK(k.layer[2] == 0);
  CHECK(k.enabled[0] == 1);
  CHECK(k.enabled[1] == 1);
  CHECK(k.enabled[2] == 1);  // the self-loop keeps the goal state inside
  CHECK(rep.i_covered);
  CHECK(rep.max_layer == 2);
}

TEST_CASE("states that cannot reach the goal stay outside the domain") {
  ExplicitLts l;
  l.nstates = 3;
  l.nactions = 1;
  l.add(0, 0, 1);  // goal
  l.add(2, 0, 2);  // trapped
  AbstractionTable abs = abstraction_from_lts(l);
  std::vector<uint8_t> goal = {0, 1, 0}, init = {1, 0, 1};
  SynthesisReport rep;
  Controller k = solve_strong(abs, goal, init, &rep);
  CHECK(k.in_dom(0));
  CHECK_FALSE(k.in_dom(2));
  CHECK_FALSE(rep.i_covered);
}

TEST_CASE("layers match the oracle on the closed loop of random systems") {
  std::mt19937_64 rng(2025);
  for (int iter = 0; iter < 40; ++iter) {
    int n = 4 + static_cast<int>(rng() % 30);
    int na = 1 + static_cast<int>(rng() % 3);
    ExplicitLts l;
    l.nstates = n;
    l.nactions = na;
    int edges = n + static_cast<int>(rng() % (3 * n));
    for (int e = 0; e < edges; ++e) {
      l.add(static_cast<int>(rng() % n), static_cast<int>(rng() % na),
            static_cast<int>(rng() % n));
    }
    std::vector<uint8_t> goal(n, 0), init(n, 0);
    std::set<int> goalset;
    int ngoal = 1 + static_cast<int>(rng() % 3);
    for (int g = 0; g < ngoal; ++g) {
      int s = static_cast<int>(rng() % n);
      goal[s] = 1;
      goalset.insert(s);
    }
    AbstractionTable abs = abstraction_from_lts(l);
    Controller k = solve_strong(abs, goal, init);

    // closed loop: only enabled pairs survive
    ExplicitLts closed;
    closed.nstates = n;
    closed.nactions = na;
    for (const auto& [s, a, sp] : l.transitions) {
      if (k.enabled[s] & (uint64_t(1) << a)) closed.add(s, a, sp);
    }
    for (int s = 0; s < n; ++s) {
      if (goal[s]) continue;
      if (k.in_dom(s)) {
        auto j = j_strong_oracle(closed, goalset, s);
        REQUIRE(j.has_value());
        CHECK(*j == static_cast<long>(k.layer[s]));
      }
    }

    // most-general: enabling any extra usable pair breaks optimality
    for (int s = 0; s < n; ++s) {
      if (!k.in_dom(s) || goal[s]) continue;
      for (int a = 0; a < na; ++a) {
        if (k.enabled[s] & (uint64_t(1) << a)) continue;
        auto img = l.img(s, a);
        if (img.empty()) continue;
        bool breaks = false;
        for (int sp : img) {
          if (!k.in_dom(sp) && !goal[sp]) { breaks = true; break; }
          uint32_t lsp = goal[sp] ? 0 : k.layer[sp];
          if (lsp >= k.layer[s]) { breaks = true; break; }
        }
        CHECK(breaks);
      }
    }
  }
}

TEST_CASE("controllers survive refinement with equal admissible sets") {
  std::mt19937_64 rng(777);
  for (int iter = 0; iter < 40; ++iter) {
    int n = 4 + static_cast<int>(rng() % 20);
    int na = 1 + static_cast<int>(rng() % 3);
    // S1 refines S2: S2 adds successors only to pairs S1 already has
    ExplicitLts s1;
    s1.nstates = n;
    s1.nactions = na;
    int edges = n + static_cast<int>(rng() % (2 * n));
    for (int e = 0; e < edges; ++e) {
      s1.add(static_cast<int>(rng() % n), static_cast<int>(rng() % na),
             static_cast<int>(rng() % n));
    }
    ExplicitLts s2 = s1;
    for (const auto& [s, a, sp] : s1.transitions) {
      (void)sp;
      if (rng() % 2) s2.add(s, a, static_cast<int>(rng() % n));
    }
    REQUIRE(refines(s1, s2));

    std::vector<uint8_t> goal(n, 0), init(n, 0);
    goal[0] = 1;
    AbstractionTable abs = abstraction_from_lts(s2);
    Controller k = solve_strong(abs, goal, init);

    // closed-loop termination on the refined system: layers strictly
    // decrease along every enabled transition until the goal
    for (const auto& [s, a, sp] : s1.transitions) {
      if (!(k.enabled[s] & (uint64_t(1) << a))) continue;
      if (k.layer[s] == 0) continue;
      bool ok = goal[sp] || (k.in_dom(sp) && k.layer[sp] < k.layer[s]);
      CHECK(ok);
    }
  }
}

TEST_CASE("coarse quantization of the switched example is uncontrollable") {
  Ex2Synth r = synth_ex2(Rational(1));
  CHECK_FALSE(r.rep.i_covered);
}

TEST_CASE("eighth-step quantization reproduces the reference controller") {
  Ex2Synth r = synth_ex2(Rational(8));
  CHECK(r.rep.i_covered);
  CHECK(r.rep.goal_cells > 0);

  // action 0 = off (u=0), action 1 = on (u=1)
  const uint64_t off_bit = 1, on_bit = 2;
  auto enabled_at = [&](long level) {
    AbstractState s{{level}};
    return r.k.enabled[r.k.states.pack(s)];
  };
  // cells strictly inside [-2, 0]: the off action only
  for (long lvl = -15; lvl <= -2; ++lvl) CHECK(enabled_at(lvl) == off_bit);
  // cells strictly inside [0, 11/8]: the on action only
  for (long lvl = 1; lvl <= 9; ++lvl) CHECK(enabled_at(lvl) == on_bit);
  // cells strictly inside [11/8, 5/2]: the off action only
  for (long lvl = 12; lvl <= 18; ++lvl) CHECK(enabled_at(lvl) == off_bit);

  // the cell holding the 5/4 fixpoint keeps its self-loop under off
  long s54 = r.k.states.pack(AbstractState{{10}});
  long pair = s54 * r.abs.nactions() + 0;
  bool self = false;
  for (int32_t sp : r.abs.succ[pair]) {
    if (sp == s54) self = true;
  }
  CHECK(r.abs.status[pair] == PairStatus::Usable);
  CHECK(self);
  CHECK(enabled_at(10) == on_bit);
}

TEST_CASE("unit-cell abstraction of a deterministic shift has single successors") {
  Dths h;
  h.state.push_back(continuous_var("x", Rational(0), Rational(4)));
  LinearExpr e = LinearExpr::variable("x'");
  e.add_term("x", Rational(-1));
  h.linear_items.push_back({std::nullopt, make_eq(std::move(e), Rational(1))});
  LinearizationResult lin = linearize(h, {});
  Quantization q;
  q.maps.push_back({"x", QuantMap::floor_scale(Rational(0), Rational(4), Rational(1))});
  AbstractionTable abs = abstract_system(lin.system, q, {});
  // cells [0,1), [1,2), [2,3): image is the next cell and nothing else
  for (long s = 0; s < 3; ++s) {
    long p = abs.pair(s, 0);
    REQUIRE(abs.status[p] == PairStatus::Usable);
    REQUIRE(abs.succ[p].size() == 1);
    CHECK(abs.succ[p][0] == s + 1);
  }
  // the top cell's image leaves the admissible region
  CHECK(abs.status[abs.pair(3, 0)] == PairStatus::Unusable);
}

TEST_CASE("abstraction is identical across thread counts") {
  Dths h = ex2(Rational(1, 10));
  LinearizationResult lin = linearize(h, {});
  Quantization q;
  q.maps.push_back({"x", QuantMap::floor_scale(Rational(-2), Rational(5, 2), Rational(8))});
  q.maps.push_back({"u", QuantMap::discrete_identity(Rational(0), Rational(1))});
  SynthOptions one, four;
  one.threads = 1;
  four.threads = 4;
  AbstractionTable t1 = abstract_system(lin.system, q, one);
  AbstractionTable t4 = abstract_system(lin.system, q, four);
  CHECK(t1.status == t4.status);
  CHECK(t1.succ == t4.succ);
}

TEST_CASE("controller dump round-trips") {
  Ex2Synth r = synth_ex2(Rational(8));
  std::stringstream buf;
  save_controller(r.k, buf);
  Controller back = load_controller(buf);
  CHECK(back.states.vars == r.k.states.vars);
  CHECK(back.states.min_level == r.k.states.min_level);
  CHECK(back.states.count == r.k.states.count);
  CHECK(back.layer == r.k.layer);
  CHECK(back.enabled == r.k.enabled);
}

TEST_CASE("region export has one row per controllable cell") {
  Ex2Synth r = synth_ex2(Rational(8));
  std::ostringstream os;
  write_region_csv(r.k, r.q, os);
  std::string text = os.str();
  long rows = std::count(text.begin(), text.end(), '\n') - 1;  // minus header
  CHECK(rows == r.rep.dom_size);
}
