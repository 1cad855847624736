#include "qsynth/milp.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

namespace qsynth {

namespace {

constexpr long kNodeLimit = 400000;

}  // namespace

// Internal kernel shared by the engine and the one-shot API.
struct MilpKernel {
  using Row = MilpEngine::Row;

  int ncols;
  std::vector<bool> integral;
  const std::vector<Row>* rows;              // base rows
  std::vector<const std::vector<Row>*> extra;

  // ---- interval propagation ------------------------------------------------

  // Tightens lo/hi in place; returns false when a domain empties.
  bool propagate(std::vector<Rational>& lo, std::vector<Rational>& hi) const {
    for (int round = 0; round < 16; ++round) {
      bool changed = false;
      auto scan = [&](const Row& r) -> bool {
        // activity bounds of the row
        // for <=: each var k: a_k x_k <= rhs - inf(sum_{j!=k} a_j x_j)
        // handled for both directions via two passes
        bool le = r.sense == Sense::Le || r.sense == Sense::Eq;
        bool ge = r.sense == Sense::Ge || r.sense == Sense::Eq;
        Rational inf_act(0), sup_act(0);
        for (const auto& [j, a] : r.terms) {
          if (a.sign() >= 0) {
            inf_act += a * lo[j];
            sup_act += a * hi[j];
          } else {
            inf_act += a * hi[j];
            sup_act += a * lo[j];
          }
        }
        if (le && inf_act > r.rhs) return false;
        if (ge && sup_act < r.rhs) return false;
        for (const auto& [k, a] : r.terms) {
          Rational inf_rest = inf_act - (a.sign() >= 0 ? a * lo[k] : a * hi[k]);
          Rational sup_rest = sup_act - (a.sign() >= 0 ? a * hi[k] : a * lo[k]);
          if (le) {
            Rational room = r.rhs - inf_rest;  // a*x_k <= room
            if (a.sign() > 0) {
              Rational nb = room / a;
              if (integral[k]) nb = nb.floor();
              if (nb < hi[k]) { hi[k] = nb; changed = true; }
            } else if (a.sign() < 0) {
              Rational nb = room / a;
              if (integral[k]) nb = nb.ceil();
              if (nb > lo[k]) { lo[k] = nb; changed = true; }
            }
          }
          if (ge) {
            Rational room = r.rhs - sup_rest;  // a*x_k >= room
            if (a.sign() > 0) {
              Rational nb = room / a;
              if (integral[k]) nb = nb.ceil();
              if (nb > lo[k]) { lo[k] = nb; changed = true; }
            } else if (a.sign() < 0) {
              Rational nb = room / a;
              if (integral[k]) nb = nb.floor();
              if (nb < hi[k]) { hi[k] = nb; changed = true; }
            }
          }
          if (lo[k] > hi[k]) return false;
        }
        return true;
      };
      for (const auto& r : *rows)
        if (!scan(r)) return false;
      for (const auto* g : extra)
        for (const auto& r : *g)
          if (!scan(r)) return false;
      if (!changed) break;
    }
    return true;
  }

  // ---- exact LP (dictionary simplex, Bland) ---------------------------------

  struct LpOut {
    bool feasible = false;
    Rational value;
    std::vector<Rational> x;
  };

  // maximize c.x subject to rows and [lo, hi]; c may be empty (feasibility)
  LpOut lp_solve(const std::vector<Rational>& lo, const std::vector<Rational>& hi,
                 const std::vector<Rational>& c, bool feas_only) const {
    LpOut out;
    // free columns after substituting fixed ones
    std::vector<int> freecol;       // dict col -> original col
    std::vector<int> colmap(ncols, -1);
    for (int j = 0; j < ncols; ++j) {
      if (lo[j] < hi[j]) {
        colmap[j] = static_cast<int>(freecol.size());
        freecol.push_back(j);
      }
    }
    const int F = static_cast<int>(freecol.size());

    // assemble <= rows over shifted vars t_j = x_j - lo_j >= 0
    struct DRow { std::vector<Rational> a; Rational b; };
    std::vector<DRow> drows;
    auto add_le = [&](const Row& r, bool negate) -> bool {
      DRow d;
      d.a.assign(F, Rational(0));
      for (const auto& [j, aj] : r.terms) {
        Rational coef = negate ? -aj : aj;
        if (colmap[j] >= 0) {
          d.a[colmap[j]] += coef;
        }
      }
      Rational b = negate ? -r.rhs : r.rhs;
      for (const auto& [j, aj] : r.terms) {
        Rational coef = negate ? -aj : aj;
        b -= coef * lo[j];  // shift: coef*(lo_j + t_j)
      }
      // all-constant row: decide now
      bool allzero = true;
      for (const auto& v : d.a)
        if (!v.is_zero()) { allzero = false; break; }
      if (allzero) return b >= Rational(0);
      d.b = b;
      drows.push_back(std::move(d));
      return true;
    };
    auto add_row = [&](const Row& r) -> bool {
      switch (r.sense) {
        case Sense::Le: return add_le(r, false);
        case Sense::Ge: return add_le(r, true);
        case Sense::Eq: return add_le(r, false) && add_le(r, true);
      }
      return true;
    };
    for (const auto& r : *rows)
      if (!add_row(r)) return out;
    for (const auto* g : extra)
      for (const auto& r : *g)
        if (!add_row(r)) return out;
    // upper-bound rows t_j <= hi_j - lo_j
    for (int f = 0; f < F; ++f) {
      DRow d;
      d.a.assign(F, Rational(0));
      d.a[f] = Rational(1);
      d.b = hi[freecol[f]] - lo[freecol[f]];
      drows.push_back(std::move(d));
    }

    const int M = static_cast<int>(drows.size());
    // dictionary: basic vars = slacks (ids F..F+M-1); nonbasic = t (ids 0..F-1)
    // x_B(i) = bval[i] - sum_j A[i][j] * x_N(j)
    std::vector<std::vector<Rational>> A(M);
    std::vector<Rational> bval(M);
    std::vector<int> basic(M), nonbasic(F);
    for (int i = 0; i < M; ++i) {
      A[i] = std::move(drows[i].a);
      bval[i] = drows[i].b;
      basic[i] = F + i;
    }
    for (int f = 0; f < F; ++f) nonbasic[f] = f;

    std::vector<Rational> zc(F, Rational(0));
    Rational zv(0);

    auto pivot = [&](int r, int jc) {
      Rational p = A[r][jc];
      Rational invp = Rational(1) / p;
      bval[r] *= invp;
      for (int j = 0; j < static_cast<int>(A[r].size()); ++j) {
        if (j == jc) A[r][j] = invp;
        else A[r][j] *= invp;
      }
      for (int i = 0; i < M; ++i) {
        if (i == r) continue;
        Rational f = A[i][jc];
        if (f.is_zero()) continue;
        bval[i] -= f * bval[r];
        for (int j = 0; j < static_cast<int>(A[i].size()); ++j) {
          if (j == jc) A[i][j] = -f * A[r][j];
          else A[i][j] -= f * A[r][j];
        }
      }
      Rational fz = zc[jc];
      if (!fz.is_zero()) {
        zv += fz * bval[r];
        for (int j = 0; j < static_cast<int>(zc.size()); ++j) {
          if (j == jc) zc[j] = -fz * A[r][j];
          else zc[j] -= fz * A[r][j];
        }
      }
      std::swap(basic[r], nonbasic[jc]);
    };

    auto bland_loop = [&]() {
      for (;;) {
        // entering: smallest var id with positive z coefficient
        int jc = -1, jid = -1;
        for (int j = 0; j < static_cast<int>(nonbasic.size()); ++j) {
          if (zc[j].sign() > 0 && (jc < 0 || nonbasic[j] < jid)) {
            jc = j;
            jid = nonbasic[j];
          }
        }
        if (jc < 0) return;  // optimal
        // leaving: min ratio, ties by smallest basic id
        int rr = -1, rid = -1;
        Rational best;
        for (int i = 0; i < M; ++i) {
          if (A[i][jc].sign() <= 0) continue;
          Rational ratio = bval[i] / A[i][jc];
          if (rr < 0 || ratio < best || (ratio == best && basic[i] < rid)) {
            rr = i;
            best = ratio;
            rid = basic[i];
          }
        }
        if (rr < 0) throw std::runtime_error("milp: LP unbounded despite variable bounds");
        pivot(rr, jc);
      }
    };

    // Phase 1 if some bval negative
    bool need_p1 = false;
    int worst = -1;
    for (int i = 0; i < M; ++i) {
      if (bval[i].sign() < 0 && (worst < 0 || bval[i] < bval[worst])) worst = i;
    }
    need_p1 = worst >= 0;
    if (need_p1) {
      const int x0 = F + M;  // auxiliary var id
      for (int i = 0; i < M; ++i) A[i].push_back(Rational(-1));
      nonbasic.push_back(x0);
      zc.assign(nonbasic.size(), Rational(0));
      zc.back() = Rational(-1);  // maximize -x0
      zv = Rational(0);
      pivot(worst, static_cast<int>(nonbasic.size()) - 1);
      bland_loop();
      if (zv.sign() < 0) return out;  // infeasible
      // drive x0 out of the basis if it lingers at value 0
      for (int i = 0; i < M; ++i) {
        if (basic[i] == x0) {
          int jc = -1;
          for (int j = 0; j < static_cast<int>(nonbasic.size()); ++j) {
            if (!A[i][j].is_zero() && nonbasic[j] != x0 &&
                (jc < 0 || nonbasic[j] < nonbasic[jc])) {
              jc = j;
            }
          }
          if (jc >= 0) pivot(i, jc);
          break;
        }
      }
      // delete the x0 column
      int xc = -1;
      for (int j = 0; j < static_cast<int>(nonbasic.size()); ++j)
        if (nonbasic[j] == x0) xc = j;
      if (xc < 0) {
        // x0 still basic: its row is identically zero; harmless, pin to 0
        for (int i = 0; i < M; ++i)
          if (basic[i] == x0) bval[i] = Rational(0);
      } else {
        nonbasic.erase(nonbasic.begin() + xc);
        for (int i = 0; i < M; ++i) A[i].erase(A[i].begin() + xc);
      }
    }

    auto values = [&]() {
      std::vector<Rational> x(ncols);
      for (int j = 0; j < ncols; ++j) x[j] = lo[j];
      for (int i = 0; i < M; ++i) {
        if (basic[i] < F) x[freecol[basic[i]]] = lo[freecol[basic[i]]] + bval[i];
      }
      return x;
    };

    if (feas_only) {
      out.feasible = true;
      out.x = values();
      out.value = Rational(0);
      return out;
    }

    // Phase 2: objective in terms of current nonbasics
    auto cost_of = [&](int var) -> Rational {
      if (var < F) return c.empty() ? Rational(0) : c[freecol[var]];
      return Rational(0);
    };
    zv = Rational(0);
    for (int j = 0; j < ncols; ++j) {
      if (!c.empty()) zv += c[j] * lo[j];
    }
    zc.assign(nonbasic.size(), Rational(0));
    for (int j = 0; j < static_cast<int>(nonbasic.size()); ++j) zc[j] = cost_of(nonbasic[j]);
    for (int i = 0; i < M; ++i) {
      Rational cb = cost_of(basic[i]);
      if (cb.is_zero()) continue;
      zv += cb * bval[i];
      for (int j = 0; j < static_cast<int>(zc.size()); ++j) zc[j] -= cb * A[i][j];
    }
    bland_loop();

    out.feasible = true;
    out.value = zv;
    out.x = values();
    return out;
  }

  // ---- branch and bound -----------------------------------------------------

  struct BnbOut {
    bool feasible = false;
    Rational value;
    std::vector<Rational> x;
  };

  // maximize; obj empty => feasibility (stop at first integral witness)
  BnbOut branch_and_bound(std::vector<Rational> lo0, std::vector<Rational> hi0,
                          const std::vector<Rational>& obj) const {
    const bool feas_only = obj.empty();
    struct Node {
      std::vector<Rational> lo, hi;
      Rational key;
      long id;
    };
    struct NodeCmp {
      bool operator()(const Node& a, const Node& b) const {
        int c = a.key.cmp(b.key);
        if (c != 0) return c < 0;   // larger key first
        return a.id > b.id;         // then older node first
      }
    };
    std::priority_queue<Node, std::vector<Node>, NodeCmp> open;
    long next_id = 0;
    BnbOut best;

    // root key: nothing solved yet; use +inf surrogate via first LP below
    open.push(Node{std::move(lo0), std::move(hi0), Rational(0), next_id++});
    bool root = true;
    long expanded = 0;

    while (!open.empty()) {
      Node nd = open.top();
      open.pop();
      if (!root && best.feasible && !feas_only && nd.key <= best.value) break;
      if (++expanded > kNodeLimit) throw std::runtime_error("milp: node limit exceeded");

      if (!propagate(nd.lo, nd.hi)) { root = false; continue; }
      LpOut lp = lp_solve(nd.lo, nd.hi, obj, feas_only);
      if (!lp.feasible) { root = false; continue; }
      if (best.feasible && !feas_only && lp.value <= best.value) { root = false; continue; }

      int frac = -1;
      for (int j = 0; j < ncols; ++j) {
        if (integral[j] && !lp.x[j].is_integer()) { frac = j; break; }
      }
      if (frac < 0) {
        if (feas_only) {
          best.feasible = true;
          best.value = Rational(0);
          best.x = std::move(lp.x);
          return best;
        }
        if (!best.feasible || lp.value > best.value) {
          best.feasible = true;
          best.value = lp.value;
          best.x = std::move(lp.x);
        }
        root = false;
        continue;
      }
      Rational fl = lp.x[frac].floor();
      Node left{nd.lo, nd.hi, lp.value, next_id++};
      left.hi[frac] = fl;
      Node right{std::move(nd.lo), std::move(nd.hi), lp.value, next_id++};
      right.lo[frac] = fl + Rational(1);
      open.push(std::move(left));
      open.push(std::move(right));
      root = false;
    }
    return best;
  }
};

// --- MilpEngine -------------------------------------------------------------

MilpEngine::MilpEngine(const ConjunctivePredicate& p) {
  for (const auto& v : p.vars) {
    v.validate();
    if (index_.count(v.name)) throw std::invalid_argument("milp: duplicate variable '" + v.name + "'");
    index_[v.name] = static_cast<int>(cols_.size());
    cols_.push_back(Col{v.name, v.kind != VarKind::Continuous, v.lower, v.upper});
  }
  for (const auto& c : p.items) {
    Row r;
    r.sense = c.sense;
    r.rhs = c.bound - c.expr.constant();
    for (const auto& [n, a] : c.expr.terms()) {
      auto it = index_.find(n);
      if (it == index_.end()) throw std::invalid_argument("milp: constraint mentions unknown variable '" + n + "'");
      r.terms.emplace_back(it->second, a);
    }
    base_rows_.push_back(std::move(r));
  }
}

int MilpEngine::col(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("milp: unknown variable '" + name + "'");
  return it->second;
}

int MilpEngine::add_row_group(const std::vector<Constraint>& rows) {
  std::vector<Row> group;
  for (const auto& c : rows) {
    Row r;
    r.sense = c.sense;
    r.rhs = c.bound - c.expr.constant();
    for (const auto& [n, a] : c.expr.terms()) r.terms.emplace_back(col(n), a);
    group.push_back(std::move(r));
  }
  groups_.push_back(std::move(group));
  return static_cast<int>(groups_.size()) - 1;
}

struct KernelSetup {
  MilpKernel k;
  std::vector<Rational> lo, hi;
};

static KernelSetup setup(const MilpEngine* self, const std::vector<MilpEngine::Col>& cols,
                         const std::vector<MilpEngine::Row>& base,
                         const std::vector<std::vector<MilpEngine::Row>>& groups,
                         const MilpEngine::Query& q) {
  (void)self;
  KernelSetup s;
  s.k.ncols = static_cast<int>(cols.size());
  s.k.integral.resize(cols.size());
  s.lo.resize(cols.size());
  s.hi.resize(cols.size());
  for (size_t j = 0; j < cols.size(); ++j) {
    s.k.integral[j] = cols[j].integral;
    s.lo[j] = cols[j].lo;
    s.hi[j] = cols[j].hi;
  }
  for (const auto& [j, b] : q.bounds) {
    s.lo[j] = b.first;
    s.hi[j] = b.second;
  }
  s.k.rows = &base;
  for (int g : q.row_groups) s.k.extra.push_back(&groups.at(g));
  return s;
}

std::optional<std::vector<Rational>> MilpEngine::feasible(const Query& q) const {
  KernelSetup s = setup(this, cols_, base_rows_, groups_, q);
  for (int j = 0; j < s.k.ncols; ++j)
    if (s.lo[j] > s.hi[j]) return std::nullopt;
  auto r = s.k.branch_and_bound(s.lo, s.hi, {});
  if (!r.feasible) return std::nullopt;
  return r.x;
}

std::optional<MilpEngine::OptResult> MilpEngine::optimize(const std::vector<Rational>& obj,
                                                          bool maximize, const Query& q) const {
  KernelSetup s = setup(this, cols_, base_rows_, groups_, q);
  for (int j = 0; j < s.k.ncols; ++j)
    if (s.lo[j] > s.hi[j]) return std::nullopt;
  std::vector<Rational> c = obj;
  if (!maximize)
    for (auto& v : c) v = -v;
  auto r = s.k.branch_and_bound(s.lo, s.hi, c);
  if (!r.feasible) return std::nullopt;
  OptResult res;
  res.value = maximize ? r.value : -r.value;
  res.x = std::move(r.x);
  return res;
}

std::optional<std::pair<Rational, Rational>> MilpEngine::column_range(int c, const Query& q) const {
  std::vector<Rational> obj(cols_.size(), Rational(0));
  obj[c] = Rational(1);
  auto mn = optimize(obj, false, q);
  if (!mn) return std::nullopt;
  auto mx = optimize(obj, true, q);
  return std::make_pair(mn->value, mx->value);
}

// --- one-shot API -----------------------------------------------------------

MilpResult solve(const MilpProblem& p) {
  MilpEngine eng(p.predicate);
  MilpEngine::Query q;
  MilpResult out;
  auto to_valuation = [&](const std::vector<Rational>& x) {
    Valuation v;
    for (int j = 0; j < eng.ncols(); ++j) v[eng.col_name(j)] = x[j];
    return v;
  };
  if (p.direction == MilpDirection::Feasibility) {
    auto w = eng.feasible(q);
    if (!w) return out;
    out.status = MilpStatus::Optimal;
    out.value = p.objective.eval(to_valuation(*w));
    out.witness = to_valuation(*w);
    return out;
  }
  std::vector<Rational> obj(eng.ncols(), Rational(0));
  for (const auto& [n, c] : p.objective.terms()) obj[eng.col(n)] = c;
  auto r = eng.optimize(obj, p.direction == MilpDirection::Maximize, q);
  if (!r) return out;
  out.status = MilpStatus::Optimal;
  out.value = r->value + p.objective.constant();
  out.witness = to_valuation(r->x);
  return out;
}

std::optional<std::map<std::string, std::pair<Rational, Rational>>> optimize_box(
    const ConjunctivePredicate& p, const std::vector<std::string>& targets) {
  MilpEngine eng(p);
  MilpEngine::Query q;
  if (!eng.feasible(q)) return std::nullopt;
  std::map<std::string, std::pair<Rational, Rational>> out;
  for (const auto& t : targets) {
    auto r = eng.column_range(eng.col(t), q);
    if (!r) return std::nullopt;  // cannot happen after feasibility
    out[t] = *r;
  }
  return out;
}

}  // namespace qsynth
