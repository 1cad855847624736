#include "qsynth/linearize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qsynth/builtins.hpp"

namespace qsynth {

namespace {

// extra slack absorbing the gap between the rational period constant and
// the true transcendental period when an argument is wrap-reduced
const Rational& wrap_slack() {
  static const Rational s(1, 1000000);
  return s;
}

double affine_at(const std::vector<Rational>& slope, const Rational& cst,
                 const std::vector<double>& r) {
  double v = cst.to_double();
  for (size_t i = 0; i < slope.size(); ++i) v += slope[i].to_double() * r[i];
  return v;
}

// dense grid over a box; density points per dimension, capped overall
template <typename F>
void for_each_sample(const Box& box, int density, F&& fn) {
  const int dim = static_cast<int>(box.iv.size());
  int per_dim = density;
  double total = std::pow(static_cast<double>(density + 1), dim);
  while (dim > 1 && total > 200000.0 && per_dim > 8) {
    per_dim /= 2;
    total = std::pow(static_cast<double>(per_dim + 1), dim);
  }
  std::vector<int> idx(dim, 0);
  std::vector<double> pt(dim);
  for (;;) {
    for (int d = 0; d < dim; ++d) {
      double a = box.iv[d].first.to_double(), b = box.iv[d].second.to_double();
      pt[d] = per_dim == 0 ? a : a + (b - a) * idx[d] / per_dim;
    }
    fn(pt);
    int d = 0;
    for (; d < dim; ++d) {
      if (++idx[d] <= per_dim) break;
      idx[d] = 0;
    }
    if (d == dim) break;
  }
}

// Coefficients are pinned to short decimal rationals: the arithmetic
// downstream (big-M elimination, simplex pivots) stays within machine
// words instead of drifting into arbitrary precision.
Rational rationalize(double v, SinMode mode) {
  return Rational::from_double_fixed(v, mode == SinMode::Paper ? 4 : 12);
}

// Shifts the cell's bound lines outward until dense sampling certifies
// f- <= f <= f+ on the cell, then folds in the safety margin.
void certify_cell(EnvelopeCell& c, const NonlinearTerm& term, const std::vector<long>& w,
                  int density, const Rational& margin) {
  double worst_hi = 0.0, worst_lo = 0.0;  // positive = violation
  for_each_sample(c.cell, density, [&](const std::vector<double>& r) {
    double f = term.eval(r, w);
    worst_hi = std::max(worst_hi, f - affine_at(c.hi_slope, c.hi_const, r));
    worst_lo = std::max(worst_lo, affine_at(c.lo_slope, c.lo_const, r) - f);
  });
  // cover between-sample wiggle of a smooth term at this density
  const Rational pad = Rational(1, 10000000);
  if (worst_hi > 0.0) c.hi_const += Rational::from_double_ceil(worst_hi, 9);
  if (worst_lo > 0.0) c.lo_const -= Rational::from_double_ceil(worst_lo, 9);
  c.hi_const += pad + margin;
  c.lo_const -= pad + margin;
}

}  // namespace

std::pair<Rational, Rational> PwlEnvelope::value_hull() const {
  bool first = true;
  Rational lo(0), hi(0);
  for (const auto& c : cells) {
    Rational clo = c.lo_const, chi = c.hi_const;
    for (size_t d = 0; d < c.cell.iv.size(); ++d) {
      const auto& [a, b] = c.cell.iv[d];
      clo += c.lo_slope[d].sign() >= 0 ? c.lo_slope[d] * a : c.lo_slope[d] * b;
      chi += c.hi_slope[d].sign() >= 0 ? c.hi_slope[d] * b : c.hi_slope[d] * a;
    }
    if (first || clo < lo) lo = clo;
    if (first || chi > hi) hi = chi;
    first = false;
  }
  return {lo, hi};
}

double envelope_violation(const PwlEnvelope& env, const NonlinearTerm& term,
                          const std::vector<long>& w) {
  double worst = -1e300;
  for (const auto& c : env.cells) {
    for_each_sample(c.cell, env.sample_density, [&](const std::vector<double>& r) {
      double f = term.eval(r, w);
      worst = std::max(worst, f - affine_at(c.hi_slope, c.hi_const, r));
      worst = std::max(worst, affine_at(c.lo_slope, c.lo_const, r) - f);
    });
  }
  return worst;
}

double envelope_gap(const PwlEnvelope& env) {
  double gap = 0.0;
  for (const auto& c : env.cells) {
    for_each_sample(c.cell, env.sample_density, [&](const std::vector<double>& r) {
      gap = std::max(gap, affine_at(c.hi_slope, c.hi_const, r) - affine_at(c.lo_slope, c.lo_const, r));
    });
  }
  return gap;
}

std::vector<Box> split_interval(const Rational& lo, const Rational& hi, int n) {
  if (n < 1) throw std::invalid_argument("split_interval: need at least one cell");
  std::vector<Box> out;
  Rational w = (hi - lo) / Rational(n);
  for (int i = 0; i < n; ++i) {
    Box b;
    Rational a = lo + w * Rational(i);
    Rational bb = (i == n - 1) ? hi : lo + w * Rational(i + 1);
    b.iv.push_back({a, bb});
    out.push_back(std::move(b));
  }
  return out;
}

PwlEnvelope sin_envelope(int ncells, SinMode mode, const Rational& margin) {
  if (ncells < 2 || ncells % 2 != 0) {
    throw std::invalid_argument("sin_envelope: cell count must be even and >= 2");
  }
  NonlinearTerm term = builtin_term("sin", "r");
  PwlEnvelope env;
  env.term_id = term.id;
  env.margin = margin;
  const Rational pi = pi_over();
  auto boxes = split_interval(-pi, pi, ncells);
  for (const auto& bx : boxes) {
    const Rational &a = bx.iv[0].first, &b = bx.iv[0].second;
    double ad = a.to_double(), bd = b.to_double();
    double md = 0.5 * (ad + bd);
    // secant through the endpoints
    double sec_s = (std::sin(bd) - std::sin(ad)) / (bd - ad);
    double sec_c = std::sin(ad) - sec_s * ad;
    // tangent at the midpoint
    double tan_s = std::cos(md);
    double tan_c = std::sin(md) - tan_s * md;

    EnvelopeCell c;
    c.cell = bx;
    bool convex = b.sign() <= 0;  // sin'' = -sin >= 0 left of zero
    double hs = convex ? sec_s : tan_s;
    double hc = convex ? sec_c : tan_c;
    double ls = convex ? tan_s : sec_s;
    double lc = convex ? tan_c : sec_c;
    c.hi_slope = {rationalize(hs, mode)};
    c.hi_const = rationalize(hc, mode);
    c.lo_slope = {rationalize(ls, mode)};
    c.lo_const = rationalize(lc, mode);
    certify_cell(c, term, {}, env.sample_density, margin);
    env.cells.push_back(std::move(c));
  }
  return env;
}

PwlEnvelope taylor_envelope(const NonlinearTerm& term, const std::vector<Box>& cells,
                            const std::vector<long>& w, const Rational& margin) {
  if (term.smoothness != Smoothness::C2) {
    throw std::invalid_argument("taylor_envelope: term '" + term.id + "' is not declared C2");
  }
  if (!term.hessian_range) {
    throw std::invalid_argument("taylor_envelope: term '" + term.id + "' lacks hessian_range");
  }
  PwlEnvelope env;
  env.term_id = term.id;
  env.w = w;
  env.margin = margin;
  const int dim = static_cast<int>(term.real_args.size());
  for (const auto& bx : cells) {
    if (static_cast<int>(bx.iv.size()) != dim) {
      throw std::invalid_argument("taylor_envelope: cell arity mismatch");
    }
    std::vector<double> x0(dim);
    for (int d = 0; d < dim; ++d) {
      x0[d] = 0.5 * (bx.iv[d].first.to_double() + bx.iv[d].second.to_double());
    }
    double f0 = term.eval(x0, w);
    // gradient by central differences; sampling certification below makes
    // the construction sound independently of this estimate's accuracy
    std::vector<double> grad(dim);
    for (int d = 0; d < dim; ++d) {
      double width = bx.iv[d].second.to_double() - bx.iv[d].first.to_double();
      double h = std::max(1e-9, width / 1024.0);
      std::vector<double> xp = x0, xm = x0;
      xp[d] += h;
      xm[d] -= h;
      grad[d] = (term.eval(xp, w) - term.eval(xm, w)) / (2.0 * h);
    }
    auto [rem_lo, rem_hi] = term.hessian_range(bx);

    EnvelopeCell c;
    c.cell = bx;
    Rational base = Rational::from_double_fixed(f0, 10);
    for (int d = 0; d < dim; ++d) {
      Rational g = Rational::from_double_fixed(grad[d], 10);
      Rational center = (bx.iv[d].first + bx.iv[d].second) / Rational(2);
      c.lo_slope.push_back(g);
      c.hi_slope.push_back(g);
      base -= g * center;
    }
    c.lo_const = base + rem_lo;
    c.hi_const = base + rem_hi;
    certify_cell(c, term, w, env.sample_density, margin);
    env.cells.push_back(std::move(c));
  }
  return env;
}

namespace {

struct FreshNames {
  LinearizationResult* res;
  Dtlhs* sys;
  void real(const std::string& name, const Rational& lo, const Rational& hi,
            const std::string& what) {
    sys->aux.push_back(continuous_var(name, lo, hi));
    res->fresh_reals.push_back(name);
    res->provenance[name] = what;
  }
  void integer(const std::string& name, const Rational& lo, const Rational& hi,
               const std::string& what) {
    sys->aux.push_back(discrete_var(name, lo, hi));
    res->fresh_integers.push_back(name);
    res->provenance[name] = what;
  }
  void boolean(const std::string& name, const std::string& what) {
    sys->aux.push_back(boolean_var(name));
    res->fresh_booleans.push_back(name);
    res->provenance[name] = what;
  }
};

const Var& var_by_name(const std::vector<Var>& vars, const std::string& n) {
  for (const auto& v : vars)
    if (v.name == n) return v;
  throw std::invalid_argument("linearize: unknown variable '" + n + "'");
}

// enumerate integer tuples of a discrete box
void enumerate_tuples(const std::vector<std::pair<long, long>>& ranges,
                      std::vector<std::vector<long>>& out) {
  std::vector<long> cur;
  std::function<void(size_t)> rec = [&](size_t d) {
    if (d == ranges.size()) {
      out.push_back(cur);
      return;
    }
    for (long v = ranges[d].first; v <= ranges[d].second; ++v) {
      cur.push_back(v);
      rec(d + 1);
      cur.pop_back();
    }
  };
  rec(0);
}

std::string wkey(const std::string& term_id, const std::vector<long>& w) {
  if (w.empty()) return term_id;
  std::string k = term_id + "@";
  for (size_t i = 0; i < w.size(); ++i) {
    if (i) k += ",";
    k += std::to_string(w[i]);
  }
  return k;
}

}  // namespace

LinearizationResult linearize(const Dths& h, const std::map<std::string, PwlEnvelope>& envelopes) {
  h.validate();
  LinearizationResult res;
  Dtlhs& sys = res.system;
  sys.state = h.state;
  sys.input = h.input;
  sys.aux = h.aux;
  sys.periodic = h.periodic;
  res.margin = Rational(0);
  FreshNames fresh{&res, &sys};

  auto all = h.all_vars();
  std::vector<GuardedConstraint> items = h.linear_items;

  // main rows of the nonlinear items, with the term replaced by a fresh real
  struct Pending {
    GuardedConstraint row;
  };
  std::vector<GuardedConstraint> extra;

  // wrap auxiliaries for periodic next-state variables: every occurrence of
  // x' gains a companion period*yq term so the stored next state is the
  // in-range representative of the raw successor angle
  std::map<std::string, std::string> wrap_of;  // periodic var -> yq name
  for (const auto& [pvar, period] : h.periodic) {
    const std::string pn = primed(pvar);
    // raw one-step range of x' from its defining equation, when present
    Rational qlo(-1), qhi(1);
    const Var& pv = var_by_name(all, pn);
    // find an equality row defining x' to bound the raw range
    bool found = false;
    for (const auto& it : h.linear_items) {
      if (it.body.sense != Sense::Eq) continue;
      Rational cp = it.body.expr.coeff(pn);
      if (cp.is_zero()) continue;
      // raw x' = (bound - rest)/cp over the admissible box
      LinearExpr rest = it.body.expr;
      rest.add_term(pn, -cp);
      auto [rlo, rhi] = interval_bounds(rest, all);
      Rational raw_lo = (it.body.bound - rhi) / cp;
      Rational raw_hi = (it.body.bound - rlo) / cp;
      if (cp.sign() < 0) std::swap(raw_lo, raw_hi);
      qlo = ((pv.lower - raw_hi) / period).ceil();
      qhi = ((pv.upper - raw_lo) / period).floor();
      found = true;
      break;
    }
    if (!found) {
      qlo = Rational(-1);
      qhi = Rational(1);
    }
    std::string qn = "yq:" + pvar;
    fresh.integer(qn, qlo, qhi, "wrap count of " + pn);
    wrap_of[pvar] = qn;
  }
  auto apply_wrap = [&](LinearExpr& e) {
    for (const auto& [pvar, qn] : wrap_of) {
      Rational c = e.coeff(primed(pvar));
      if (!c.is_zero()) e.add_term(qn, c * h.periodic.at(pvar));
    }
  };
  for (auto& it : items) apply_wrap(it.body.expr);

  int term_idx = 0;
  for (const auto& nl : h.nonlinear_items) {
    const NonlinearTerm& term = nl.term;
    const std::string tid = term.id + "#" + std::to_string(term_idx++);

    // discrete cases of the term
    std::vector<std::vector<long>> cases;
    if (term.discrete_args.empty()) {
      cases.push_back({});
    } else {
      std::vector<std::pair<long, long>> ranges;
      long combos = 1;
      for (const auto& an : term.discrete_args) {
        const Var& av = var_by_name(all, an);
        long lo = av.lower.to_long(), hi = av.upper.to_long();
        ranges.push_back({lo, hi});
        combos *= (hi - lo + 1);
        if (combos > 64) {
          throw std::invalid_argument("linearize: discrete case explosion for term '" + term.id + "'");
        }
      }
      enumerate_tuples(ranges, cases);
    }

    // per-case selector booleans when W is nonempty
    std::vector<std::string> case_sel;
    if (!term.discrete_args.empty()) {
      LinearExpr sum;
      for (size_t k = 0; k < cases.size(); ++k) {
        std::string gn = "g:" + tid + ":" + std::to_string(k);
        fresh.boolean(gn, "case selector of " + term.id);
        case_sel.push_back(gn);
        sum.add_term(gn, Rational(1));
        for (size_t d = 0; d < term.discrete_args.size(); ++d) {
          LinearExpr e = LinearExpr::variable(term.discrete_args[d]);
          extra.push_back({Guard{gn, true}, make_eq(std::move(e), Rational(cases[k][d]))});
        }
      }
      extra.push_back({std::nullopt, make_eq(std::move(sum), Rational(1))});
    }

    for (size_t k = 0; k < cases.size(); ++k) {
      const std::vector<long>& w = cases[k];
      auto eit = envelopes.find(wkey(term.id, w));
      if (eit == envelopes.end()) {
        throw std::invalid_argument("linearize: missing envelope for term '" + wkey(term.id, w) + "'");
      }
      const PwlEnvelope& env = eit->second;
      double viol = envelope_violation(env, term, w);
      if (viol > 0.0) {
        throw std::invalid_argument("linearize: envelope for '" + wkey(term.id, w) +
                                    "' fails the sampling soundness check");
      }
      if (env.cells.empty()) throw std::invalid_argument("linearize: empty envelope");
      res.margin = max(res.margin, env.margin);

      // argument vector fed to the envelope; wrap-reduce 1-D periodic args
      // whose range exceeds the envelope domain
      std::vector<std::string> env_args = term.real_args;
      Rational slack(0);
      if (term.real_args.size() == 1) {
        const std::string& an = term.real_args[0];
        const Var& av = var_by_name(all, an);
        const Rational& dlo = env.cells.front().cell.iv[0].first;
        const Rational& dhi = env.cells.back().cell.iv[0].second;
        if (av.lower < dlo || av.upper > dhi) {
          auto pit = h.periodic.find(an);
          if (pit == h.periodic.end()) {
            throw std::invalid_argument("linearize: envelope domain does not cover argument '" + an +
                                        "' and it is not periodic");
          }
          const Rational& period = pit->second;
          if (dhi - dlo < period) {
            throw std::invalid_argument("linearize: envelope domain narrower than the period of '" +
                                        an + "'");
          }
          Rational klo = ((av.lower - dhi) / period).ceil();
          Rational khi = ((av.upper - dlo) / period).floor();
          std::string kn = "yk:" + an + ":" + tid;
          std::string rn = "ya:" + an + ":" + tid;
          fresh.integer(kn, klo, khi, "period index of " + an);
          fresh.real(rn, dlo, dhi, "reduced angle of " + an);
          LinearExpr red = LinearExpr::variable(an);
          red.add_term(kn, -period);
          red.add_term(rn, Rational(-1));
          extra.push_back({std::nullopt, make_eq(std::move(red), Rational(0))});
          env_args[0] = rn;
          slack = wrap_slack();
        }
      }

      auto hull = env.value_hull();
      std::string yn = "yf:" + wkey(tid, w);
      fresh.real(yn, hull.first - slack, hull.second + slack, "value of " + term.id);

      LinearExpr zsum;
      for (size_t i = 0; i < env.cells.size(); ++i) {
        const EnvelopeCell& c = env.cells[i];
        std::string zn = "z:" + wkey(tid, w) + ":" + std::to_string(i);
        fresh.boolean(zn, "cell selector of " + term.id);
        zsum.add_term(zn, Rational(1));
        // membership: z -> arg in the cell
        for (size_t d = 0; d < env_args.size(); ++d) {
          LinearExpr lo = LinearExpr::variable(env_args[d]);
          extra.push_back({Guard{zn, true}, make_ge(lo, c.cell.iv[d].first)});
          LinearExpr hi = LinearExpr::variable(env_args[d]);
          extra.push_back({Guard{zn, true}, make_le(hi, c.cell.iv[d].second)});
        }
        // z -> f-(arg) - slack <= y <= f+(arg) + slack
        LinearExpr up = LinearExpr::variable(yn);
        for (size_t d = 0; d < env_args.size(); ++d) up.add_term(env_args[d], -c.hi_slope[d]);
        extra.push_back({Guard{zn, true}, make_le(std::move(up), c.hi_const + slack)});
        LinearExpr dn = LinearExpr::variable(yn);
        for (size_t d = 0; d < env_args.size(); ++d) dn.add_term(env_args[d], -c.lo_slope[d]);
        extra.push_back({Guard{zn, true}, make_ge(std::move(dn), c.lo_const - slack)});
      }
      extra.push_back({std::nullopt, make_ge(std::move(zsum), Rational(1))});

      // the substituted main row
      LinearExpr main = nl.linear;
      apply_wrap(main);
      main.add_term(yn, nl.coeff);
      if (term.discrete_args.empty()) {
        extra.push_back({std::nullopt, Constraint{std::move(main), nl.sense, nl.bound}});
      } else {
        extra.push_back({Guard{case_sel[k], true}, Constraint{std::move(main), nl.sense, nl.bound}});
      }
    }
  }

  for (auto& e : extra) items.push_back(std::move(e));
  sys.transition.vars.clear();
  for (const auto& v : sys.state) sys.transition.vars.push_back(v);
  for (const auto& v : sys.input) sys.transition.vars.push_back(v);
  for (const auto& v : sys.aux) sys.transition.vars.push_back(v);
  for (const auto& v : sys.next_state()) sys.transition.vars.push_back(v);
  sys.transition.items = std::move(items);
  sys.validate();
  return res;
}

std::map<std::string, PwlEnvelope> default_envelopes(const Dths& h, int ncells, SinMode mode,
                                                     const Rational& margin) {
  std::map<std::string, PwlEnvelope> out;
  auto all = h.all_vars();
  for (const auto& nl : h.nonlinear_items) {
    const NonlinearTerm& t = nl.term;
    std::vector<std::vector<long>> cases;
    if (t.discrete_args.empty()) {
      cases.push_back({});
    } else {
      std::vector<std::pair<long, long>> ranges;
      for (const auto& an : t.discrete_args) {
        const Var& av = var_by_name(all, an);
        ranges.push_back({av.lower.to_long(), av.upper.to_long()});
      }
      enumerate_tuples(ranges, cases);
    }
    for (const auto& w : cases) {
      std::string key = wkey(t.id, w);
      if (out.count(key)) continue;
      if (t.fn == "sin" && t.real_args.size() == 1) {
        PwlEnvelope e = sin_envelope(ncells, mode, margin);
        e.term_id = t.id;
        out[key] = std::move(e);
        continue;
      }
      // Taylor over the argument box (wrap-reduced range for periodic args)
      std::vector<Box> cells;
      const Var& av = var_by_name(all, t.real_args[0]);
      Rational lo = av.lower, hi = av.upper;
      if (t.real_args.size() == 1 && h.periodic.count(t.real_args[0])) {
        const Rational& p = h.periodic.at(t.real_args[0]);
        if (hi - lo > p) {
          lo = -(p / Rational(2));
          hi = p / Rational(2);
        }
      }
      if (t.real_args.size() == 1) {
        cells = split_interval(lo, hi, ncells);
      } else {
        // one cell per dimension split along the first axis only
        cells = split_interval(lo, hi, ncells);
        for (auto& c : cells) {
          for (size_t d = 1; d < t.real_args.size(); ++d) {
            const Var& dv = var_by_name(all, t.real_args[d]);
            c.iv.push_back({dv.lower, dv.upper});
          }
        }
      }
      out[key] = taylor_envelope(t, cells, w, margin);
    }
  }
  return out;
}

}  // namespace qsynth
