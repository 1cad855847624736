#include "qsynth/sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qsynth {

namespace {

// Per-variable update rule extracted from the transition relation:
// solve the defining equality for x'_i, giving the one-step image in
// doubles; the continuous rate is (image - x_i) / T.
struct RateCase {
  int guard_input = -1;  // index into inputs; -1 = unguarded
  bool guard_positive = true;
  double bound = 0.0;
  double inv_cp = 1.0;                 // 1 / coefficient of x'_i
  double constant = 0.0;               // constant of the residual expression
  std::vector<double> state_coef;      // residual coefficients
  std::vector<double> input_coef;
  // nonlinear contributions: factor * fn(state arg)
  struct Nl {
    double factor;
    int arg;
    double (*fn)(double);
  };
  std::vector<Nl> nl;
};

double fn_sin(double x) { return std::sin(x); }
double fn_cos(double x) { return std::cos(x); }
double fn_sq(double x) { return x * x; }

struct CompiledPlant {
  int nx = 0, nu = 0;
  std::vector<std::vector<RateCase>> cases;  // per state var
  std::vector<double> period;                // 0 = not periodic
  std::vector<double> lo, hi;                // admissible region (map domains)

  double image(int i, const std::vector<double>& x, const std::vector<double>& u) const {
    for (const RateCase& c : cases[i]) {
      if (c.guard_input >= 0) {
        bool on = u[c.guard_input] > 0.5;
        if (on != c.guard_positive) continue;
      }
      double rest = c.constant;
      for (int j = 0; j < nx; ++j) rest += c.state_coef[j] * x[j];
      for (int j = 0; j < nu; ++j) rest += c.input_coef[j] * u[j];
      for (const auto& t : c.nl) rest += t.factor * t.fn(x[t.arg]);
      return (c.bound - rest) * c.inv_cp;
    }
    throw std::runtime_error("simulate: no transition case active for a state variable");
  }
};

int index_of(const std::vector<Var>& vars, const std::string& n) {
  for (size_t i = 0; i < vars.size(); ++i)
    if (vars[i].name == n) return static_cast<int>(i);
  return -1;
}

CompiledPlant compile_plant(const Dths& h, const Quantization& q) {
  if (!h.aux.empty()) throw std::invalid_argument("simulate: plant must have no auxiliary variables");
  CompiledPlant p;
  p.nx = static_cast<int>(h.state.size());
  p.nu = static_cast<int>(h.input.size());
  p.cases.resize(p.nx);
  p.period.assign(p.nx, 0.0);
  for (int i = 0; i < p.nx; ++i) {
    auto it = h.periodic.find(h.state[i].name);
    if (it != h.periodic.end()) p.period[i] = it->second.to_double();
    const QuantMap& m = q.map_of(h.state[i].name);
    p.lo.push_back(m.lo().to_double());
    p.hi.push_back(m.hi().to_double());
  }

  auto add_case = [&](int i, const std::optional<Guard>& g, const LinearExpr& expr,
                      const Rational& bound, const Rational& coeff_f, const NonlinearTerm* term) {
    const std::string pn = primed(h.state[i].name);
    Rational cp = expr.coeff(pn);
    if (cp.is_zero()) return false;
    RateCase c;
    if (g) {
      c.guard_input = index_of(h.input, g->var);
      if (c.guard_input < 0) {
        throw std::invalid_argument("simulate: transition guarded by a non-input variable");
      }
      c.guard_positive = g->positive;
    }
    c.bound = bound.to_double();
    c.inv_cp = 1.0 / cp.to_double();
    c.constant = expr.constant().to_double();
    c.state_coef.assign(p.nx, 0.0);
    c.input_coef.assign(p.nu, 0.0);
    for (const auto& [n, co] : expr.terms()) {
      if (n == pn) continue;
      int si = index_of(h.state, n);
      if (si >= 0) {
        c.state_coef[si] += co.to_double();
        continue;
      }
      int ui = index_of(h.input, n);
      if (ui >= 0) {
        c.input_coef[ui] += co.to_double();
        continue;
      }
      throw std::invalid_argument("simulate: transition mentions unsupported variable '" + n + "'");
    }
    if (term) {
      RateCase::Nl t;
      t.factor = coeff_f.to_double();
      t.arg = index_of(h.state, term->real_args.at(0));
      if (t.arg < 0 || !term->discrete_args.empty()) {
        throw std::invalid_argument("simulate: nonlinear term must be unary over a state variable");
      }
      if (term->fn == "sin") t.fn = fn_sin;
      else if (term->fn == "cos") t.fn = fn_cos;
      else if (term->fn == "sq") t.fn = fn_sq;
      else throw std::invalid_argument("simulate: unknown built-in '" + term->fn + "'");
      c.nl.push_back(t);
    }
    p.cases[i].push_back(std::move(c));
    return true;
  };

  for (int i = 0; i < p.nx; ++i) {
    for (const auto& it : h.linear_items) {
      if (it.body.sense != Sense::Eq) continue;
      add_case(i, it.guard, it.body.expr, it.body.bound, Rational(0), nullptr);
    }
    for (const auto& it : h.nonlinear_items) {
      if (it.sense != Sense::Eq) continue;
      add_case(i, std::nullopt, it.linear, it.bound, it.coeff, &it.term);
    }
    if (p.cases[i].empty()) {
      throw std::invalid_argument("simulate: no defining equation for '" + h.state[i].name + "'");
    }
  }
  return p;
}

double wrap_into(double x, double period, double lo, double hi) {
  if (period <= 0.0) return x;
  while (x > hi) x -= period;
  while (x < lo) x += period;
  return x;
}

}  // namespace

std::optional<double> Trajectory::settle_time(double window) const {
  if (times.empty()) return std::nullopt;
  const double tmax = times.back();
  for (size_t i = 0; i < times.size(); ++i) {
    if (!in_goal[i]) continue;
    if (tmax - times[i] < window) return std::nullopt;  // horizon too short to certify
    bool ok = true;
    for (size_t j = i; j < times.size() && times[j] - times[i] <= window; ++j) {
      if (!in_goal[j]) {
        ok = false;
        break;
      }
    }
    if (ok) return times[i];
  }
  return std::nullopt;
}

double Trajectory::ripple_after(double settle) const {
  double r = 0.0;
  for (size_t i = 0; i < times.size(); ++i) {
    if (times[i] < settle) continue;
    if (!states[i].empty()) r = std::max(r, std::abs(states[i][0]));
  }
  return r;
}

Trajectory simulate(const SimConfig& cfg) {
  if (!cfg.plant || !cfg.quant) throw std::invalid_argument("simulate: plant and quantization required");
  if (cfg.Ts <= 0.0 || cfg.T <= 0.0) throw std::invalid_argument("simulate: nonpositive time step");
  double ratio = cfg.T / cfg.Ts;
  long per_tick = std::lround(ratio);
  if (per_tick < 1 || std::abs(ratio - static_cast<double>(per_tick)) > 1e-9) {
    throw std::invalid_argument("simulate: T must be an integer multiple of Ts");
  }
  if (cfg.disturbance < 0.0 || cfg.disturbance > 0.04) {
    throw std::invalid_argument("simulate: disturbance fraction outside [0, 0.04]");
  }
  const Dths& h = *cfg.plant;
  if (cfg.controller && h.input.size() != 1) {
    throw std::invalid_argument("simulate: closed-loop runs support exactly one input variable");
  }
  CompiledPlant plant = compile_plant(h, *cfg.quant);
  if (static_cast<int>(cfg.x0.size()) != plant.nx) {
    throw std::invalid_argument("simulate: initial state arity mismatch");
  }

  // quantization in doubles, mirroring the rational maps
  std::vector<const QuantMap*> maps;
  for (const auto& v : h.state) maps.push_back(&cfg.quant->map_of(v.name));
  auto levels_of = [&](const std::vector<double>& x, std::vector<long>& out) -> bool {
    for (int i = 0; i < plant.nx; ++i) {
      double lo = plant.lo[i], hi = plant.hi[i];
      if (x[i] < lo || x[i] > hi) return false;
      const QuantMap& m = *maps[i];
      long lvl = 0;
      switch (m.kind()) {
        case QuantKind::Uniform: {
          double w = (hi - lo) / static_cast<double>(m.level_count());
          lvl = static_cast<long>(std::floor((x[i] - lo) / w));
          if (lvl >= m.level_count()) lvl = m.level_count() - 1;
          if (lvl < 0) lvl = 0;
          break;
        }
        case QuantKind::FloorScale: {
          double scale = 1.0 / m.step().to_double();
          lvl = static_cast<long>(std::floor(x[i] * scale));
          long top = m.min_level() + m.level_count() - 1;
          if (lvl > top) lvl = top;
          if (lvl < m.min_level()) lvl = m.min_level();
          break;
        }
        case QuantKind::DiscreteIdentity:
          lvl = std::lround(x[i]);
          break;
      }
      out[i] = lvl;
    }
    return true;
  };

  std::mt19937_64 rng(cfg.seed);
  auto unit = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };  // [0,1)

  Trajectory tr;
  std::vector<double> x = cfg.x0;
  std::vector<double> u(plant.nu, 0.0);
  std::vector<long> levels(plant.nx, 0);
  long long held = cfg.fixed_command;
  const long total_steps = std::lround(cfg.horizon / cfg.Ts);
  const double d = cfg.disturbance;

  Valuation gval;
  auto goal_holds = [&](const std::vector<double>& st) {
    if (!cfg.goal) return false;
    for (int i = 0; i < plant.nx; ++i) gval[h.state[i].name] = Rational::from_double(st[i]);
    return evaluate(*cfg.goal, gval);
  };

  for (long step = 0; step <= total_steps; ++step) {
    if (step % per_tick == 0) {
      double t = static_cast<double>(step) * cfg.Ts;
      if (!levels_of(x, levels)) {
        tr.left_admissible = true;
        break;
      }
      if (cfg.controller) {
        long long cmd = cfg.controller->command(levels);
        if (cmd == cfg.controller->fault()) {
          tr.fault = true;
          break;
        }
        held = cmd;
      }
      tr.times.push_back(t);
      tr.states.push_back(x);
      tr.commands.push_back(held);
      bool in_g = goal_holds(x);
      tr.in_goal.push_back(in_g ? 1 : 0);
      if (in_g && tr.reached_goal_time < 0.0) tr.reached_goal_time = t;
    }
    if (step == total_steps) break;
    if (plant.nu > 0) u[0] = static_cast<double>(held);
    // explicit Euler with per-component disturbance on the increment
    std::vector<double> inc(plant.nx);
    for (int i = 0; i < plant.nx; ++i) {
      double rate = (plant.image(i, x, u) - x[i]) / cfg.model_T;
      inc[i] = cfg.Ts * rate;
    }
    for (int i = 0; i < plant.nx; ++i) {
      if (d > 0.0) {
        double delta = d * (2.0 * unit() - 1.0);
        if (cfg.additive_disturbance) {
          inc[i] += delta * cfg.Ts;
        } else {
          inc[i] *= 1.0 + delta;
        }
      }
      x[i] += inc[i];
      if (plant.period[i] > 0.0) {
        x[i] = wrap_into(x[i], plant.period[i], -plant.period[i] / 2.0, plant.period[i] / 2.0);
      }
    }
  }

  if (tr.reached_goal_time >= 0.0) {
    tr.stayed_in_goal = true;
    bool after = false;
    for (size_t i = 0; i < tr.times.size(); ++i) {
      if (tr.times[i] >= tr.reached_goal_time) after = true;
      if (after && !tr.in_goal[i]) {
        tr.stayed_in_goal = false;
        break;
      }
    }
    if (tr.left_admissible || tr.fault) tr.stayed_in_goal = false;
  }
  return tr;
}

void write_trajectory_csv(const Trajectory& t, const std::vector<std::string>& var_names,
                          std::ostream& os) {
  os << "time";
  for (const auto& n : var_names) os << "," << n;
  os << ",command\n";
  char buf[64];
  for (size_t i = 0; i < t.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g", t.times[i]);
    os << buf;
    for (double v : t.states[i]) {
      std::snprintf(buf, sizeof buf, "%.10g", v);
      os << "," << buf;
    }
    os << "," << t.commands[i] << "\n";
  }
}

std::string BatchResult::to_string() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "{\"runs\": %d, \"successes\": %d, \"success_rate\": %.6g, "
                "\"mean_settle_s\": %.6g, \"max_settle_s\": %.6g, \"max_ripple\": %.6g}",
                runs, successes, runs > 0 ? double(successes) / runs : 0.0, mean_settle,
                max_settle, max_ripple);
  return buf;
}

BatchResult batch(const SimConfig& base, const std::vector<std::vector<double>>& initials,
                  const std::vector<uint64_t>& seeds, double deadline, double stay_window) {
  BatchResult res;
  struct Run {
    std::vector<double> x0;
    uint64_t seed;
  };
  std::vector<Run> runs;
  for (const auto& x0 : initials)
    for (uint64_t s : seeds) runs.push_back({x0, s});
  res.runs = static_cast<int>(runs.size());
  if (runs.empty()) return res;

  std::vector<std::optional<double>> settle(runs.size());
  std::vector<double> ripple(runs.size(), 0.0);
  std::atomic<size_t> next{0};
  int nthreads = std::max(1u, std::thread::hardware_concurrency());
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      SimConfig cfg = base;
      cfg.x0 = runs[i].x0;
      cfg.seed = runs[i].seed;
      Trajectory t = simulate(cfg);
      settle[i] = t.settle_time(stay_window);
      if (settle[i]) ripple[i] = t.ripple_after(*settle[i]);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  double sum = 0.0;
  for (size_t i = 0; i < runs.size(); ++i) {
    if (settle[i] && *settle[i] <= deadline) {
      ++res.successes;
      sum += *settle[i];
      res.max_settle = std::max(res.max_settle, *settle[i]);
      res.max_ripple = std::max(res.max_ripple, ripple[i]);
    }
  }
  if (res.successes > 0) res.mean_settle = sum / res.successes;
  return res;
}

}  // namespace qsynth
