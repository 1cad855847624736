#include "qsynth/synth.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qsynth {

// --- packed layouts ---------------------------------------------------------

long StateLayout::size() const {
  long n = 1;
  for (long c : count) n *= c;
  return n;
}

long StateLayout::pack(const AbstractState& s) const {
  if (s.levels.size() != vars.size()) throw std::invalid_argument("layout: arity mismatch");
  long idx = 0;
  for (size_t i = 0; i < vars.size(); ++i) {
    long off = s.levels[i] - min_level[i];
    if (off < 0 || off >= count[i]) throw std::out_of_range("layout: level outside image");
    idx = idx * count[i] + off;
  }
  return idx;
}

AbstractState StateLayout::unpack(long idx) const {
  AbstractState s;
  s.levels.assign(vars.size(), 0);
  for (size_t i = vars.size(); i-- > 0;) {
    s.levels[i] = min_level[i] + idx % count[i];
    idx /= count[i];
  }
  return s;
}

bool StateLayout::contains(const AbstractState& s) const {
  if (s.levels.size() != vars.size()) return false;
  for (size_t i = 0; i < vars.size(); ++i) {
    long off = s.levels[i] - min_level[i];
    if (off < 0 || off >= count[i]) return false;
  }
  return true;
}

StateLayout state_layout(const Dtlhs& sys, const Quantization& q) {
  StateLayout l;
  for (const auto& v : sys.state) {
    const QuantMap& m = q.map_of(v.name);
    l.vars.push_back(v.name);
    l.min_level.push_back(m.min_level());
    l.count.push_back(m.level_count());
  }
  return l;
}

StateLayout action_layout(const Dtlhs& sys, const Quantization& q) {
  StateLayout l;
  for (const auto& v : sys.input) {
    const QuantMap& m = q.map_of(v.name);
    l.vars.push_back(v.name);
    l.min_level.push_back(m.min_level());
    l.count.push_back(m.level_count());
  }
  return l;
}

// --- abstraction ------------------------------------------------------------

namespace {

struct CellCache {
  // per layout var, per level offset: closed cell interval
  std::vector<std::vector<std::pair<Rational, Rational>>> cells;

  CellCache(const StateLayout& layout, const Quantization& q) {
    cells.resize(layout.vars.size());
    for (size_t i = 0; i < layout.vars.size(); ++i) {
      const QuantMap& m = q.map_of(layout.vars[i]);
      cells[i].reserve(layout.count[i]);
      for (long k = 0; k < layout.count[i]; ++k) {
        cells[i].push_back(m.cell(layout.min_level[i] + k));
      }
    }
  }
};

}  // namespace

AbstractionTable abstract_system(const Dtlhs& sys, const Quantization& q,
                                 const SynthOptions& opt) {
  sys.validate();
  for (const auto& v : sys.state) {
    if (!q.has(v.name)) throw std::invalid_argument("abstract: no quantization for '" + v.name + "'");
  }
  for (const auto& v : sys.input) {
    if (!q.has(v.name)) throw std::invalid_argument("abstract: no quantization for '" + v.name + "'");
  }

  AbstractionTable tab;
  tab.states = state_layout(sys, q);
  tab.actions = action_layout(sys, q);
  const long nstates = tab.states.size();
  const long nactions = tab.actions.size();
  if (nactions > 64) throw std::invalid_argument("abstract: more than 64 abstract actions");
  tab.status.assign(nstates * nactions, PairStatus::Inadmissible);
  tab.succ.assign(nstates * nactions, {});

  // engine over the guard-free transition system, with non-periodic
  // next-state bounds widened so exits from A are observable
  GuardedPredicate widened = sys.transition;
  for (auto& v : widened.vars) {
    bool is_next = !v.name.empty() && v.name.back() == '\'';
    if (!is_next) continue;
    std::string base = v.name.substr(0, v.name.size() - 1);
    if (sys.periodic.count(base)) continue;
    Rational w = v.upper - v.lower;
    v.lower = v.lower - w - Rational(1);
    v.upper = v.upper + w + Rational(1);
  }
  const ConjunctivePredicate flat = eliminate_guards(widened);
  MilpEngine eng(flat);

  // stationarity rows x' = x, one per state variable
  std::vector<Constraint> stat_rows;
  for (const auto& v : sys.state) {
    LinearExpr e = LinearExpr::variable(primed(v.name));
    e.add_term(v.name, Rational(-1));
    stat_rows.push_back(make_eq(std::move(e), Rational(0)));
  }
  const int stat_group = eng.add_row_group(stat_rows);

  // column ids and admissible intervals
  const size_t nsv = sys.state.size();
  std::vector<int> scol(nsv), pcol(nsv);
  std::vector<bool> periodic(nsv);
  std::vector<std::pair<Rational, Rational>> adm(nsv);  // map domain per state var
  for (size_t i = 0; i < nsv; ++i) {
    scol[i] = eng.col(sys.state[i].name);
    pcol[i] = eng.col(primed(sys.state[i].name));
    periodic[i] = sys.periodic.count(sys.state[i].name) > 0;
    const QuantMap& m = q.map_of(sys.state[i].name);
    adm[i] = {m.lo(), m.hi()};
  }
  std::vector<int> ucol;
  for (const auto& v : sys.input) ucol.push_back(eng.col(v.name));

  CellCache scells(tab.states, q);
  CellCache acells(tab.actions, q);

  const auto t0 = std::chrono::steady_clock::now();
  std::atomic<long> next_chunk{0};
  std::atomic<long> done{0};
  const long chunk = 64;
  int nthreads = opt.threads > 0 ? opt.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;

  auto worker = [&]() {
    std::vector<long> sl(nsv), al(ucol.size());
    for (;;) {
      long begin = next_chunk.fetch_add(chunk);
      if (begin >= nstates) return;
      long end = std::min(begin + chunk, nstates);
      for (long s = begin; s < end; ++s) {
        // unpack levels
        long rem = s;
        for (size_t i = nsv; i-- > 0;) {
          sl[i] = rem % tab.states.count[i];
          rem /= tab.states.count[i];
        }
        for (long a = 0; a < nactions; ++a) {
          long arem = a;
          for (size_t i = al.size(); i-- > 0;) {
            al[i] = arem % tab.actions.count[i];
            arem /= tab.actions.count[i];
          }
          MilpEngine::Query base;
          for (size_t i = 0; i < nsv; ++i) base.bounds.push_back({scol[i], scells.cells[i][sl[i]]});
          for (size_t i = 0; i < al.size(); ++i)
            base.bounds.push_back({ucol[i], acells.cells[i][al[i]]});

          // image bounding box over the next-state variables
          bool infeasible = false, exits = false;
          std::vector<std::pair<Rational, Rational>> box(nsv);
          for (size_t i = 0; i < nsv && !infeasible; ++i) {
            auto r = eng.column_range(pcol[i], base);
            if (!r) {
              infeasible = true;
              break;
            }
            box[i] = *r;
            if (!periodic[i] && (box[i].first < adm[i].first || box[i].second > adm[i].second)) {
              exits = true;
            }
          }
          const long pidx = tab.pair(s, a);
          if (infeasible) continue;
          if (exits) {
            tab.status[pidx] = PairStatus::Unusable;
            continue;
          }

          // candidate successor cells overlapping the box
          std::vector<std::pair<long, long>> lvl(nsv);
          bool empty = false;
          for (size_t i = 0; i < nsv; ++i) {
            const QuantMap& m = q.map_of(sys.state[i].name);
            Rational lo = max(box[i].first, adm[i].first);
            Rational hi = min(box[i].second, adm[i].second);
            if (lo > hi) {
              empty = true;
              break;
            }
            auto l0 = m.level_of(lo), l1 = m.level_of(hi);
            lvl[i] = {*l0, *l1};
          }
          if (empty) {
            tab.status[pidx] = PairStatus::Unusable;
            continue;
          }

          std::vector<int32_t> succ;
          std::vector<long> cur(nsv);
          for (size_t i = 0; i < nsv; ++i) cur[i] = lvl[i].first;
          for (;;) {
            // candidate packed index and cell box
            long cs = 0;
            for (size_t i = 0; i < nsv; ++i) {
              cs = cs * tab.states.count[i] + (cur[i] - tab.states.min_level[i]);
            }
            MilpEngine::Query qq = base;
            for (size_t i = 0; i < nsv; ++i) {
              qq.bounds.push_back({pcol[i], scells.cells[i][cur[i] - tab.states.min_level[i]]});
            }
            auto wit = eng.feasible(qq);
            if (wit) {
              // cells are left-closed right-open (except the last): an
              // overlap pinned to an open right face, of the source or of
              // the candidate cell, is not a real transition
              bool keep = true;
              auto face_pinned = [&](int colid, size_t i, long level_off) {
                const auto& cell = scells.cells[i][level_off];
                bool open_face =
                    level_off < tab.states.count[i] - 1 && cell.first < cell.second;
                if (!open_face || (*wit)[colid] != cell.second) return false;
                std::vector<Rational> obj(eng.ncols(), Rational(0));
                obj[colid] = Rational(1);
                auto mn = eng.optimize(obj, false, qq);
                return mn && mn->value == cell.second;
              };
              for (size_t i = 0; i < nsv && keep; ++i) {
                if (face_pinned(scol[i], i, sl[i])) keep = false;
                if (keep && face_pinned(pcol[i], i, cur[i] - tab.states.min_level[i]))
                  keep = false;
              }
              if (keep && cs == s) {
                // drop the self-loop when no stationary point exists in the
                // cell closure: a run that never leaves the cell has a
                // Cesaro-average fixpoint there
                MilpEngine::Query sq = qq;
                sq.row_groups.push_back(stat_group);
                keep = eng.feasible(sq).has_value();
              }
              if (keep) succ.push_back(static_cast<int32_t>(cs));
            }
            size_t d = nsv;
            while (d-- > 0) {
              if (++cur[d] <= lvl[d].second) break;
              cur[d] = lvl[d].first;
              if (d == 0) {
                d = static_cast<size_t>(-1);
                break;
              }
            }
            if (d == static_cast<size_t>(-1)) break;
          }
          if (succ.empty()) {
            // every witness sat on a dropped self-loop; keep the pair sound
            succ.push_back(static_cast<int32_t>(s));
          }
          tab.status[pidx] = PairStatus::Usable;
          tab.succ[pidx] = std::move(succ);
        }
        long d = ++done;
        if (opt.verbose && d % 4096 == 0) {
          fprintf(stderr, "  abstraction: %ld / %ld cells\n", d, nstates);
        }
      }
    }
  };

  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  if (opt.verbose) {
    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fprintf(stderr, "  abstraction done in %.1f s\n", dt);
  }
  return tab;
}

AbstractionTable abstraction_from_lts(const ExplicitLts& l) {
  AbstractionTable tab;
  tab.states.vars = {"s"};
  tab.states.min_level = {0};
  tab.states.count = {l.nstates};
  tab.actions.vars = {"a"};
  tab.actions.min_level = {0};
  tab.actions.count = {l.nactions};
  tab.status.assign(static_cast<size_t>(l.nstates) * l.nactions, PairStatus::Inadmissible);
  tab.succ.assign(static_cast<size_t>(l.nstates) * l.nactions, {});
  for (const auto& [s, a, sp] : l.transitions) {
    long p = tab.pair(s, a);
    tab.status[p] = PairStatus::Usable;
    tab.succ[p].push_back(sp);
  }
  for (auto& v : tab.succ) std::sort(v.begin(), v.end());
  return tab;
}

// --- backward fixpoint ------------------------------------------------------

Controller solve_strong(const AbstractionTable& abs, const std::vector<uint8_t>& goal,
                        const std::vector<uint8_t>& init, SynthesisReport* report) {
  const long n = abs.nstates();
  const long na = abs.nactions();
  if (static_cast<long>(goal.size()) != n || static_cast<long>(init.size()) != n) {
    throw std::invalid_argument("solve_strong: goal/init marking size mismatch");
  }
  const auto t0 = std::chrono::steady_clock::now();

  Controller k;
  k.states = abs.states;
  k.actions = abs.actions;
  k.layer.assign(n, kNotInDom);
  k.enabled.assign(n, 0);

  // predecessor lists and uncovered-successor counters per usable pair
  std::vector<int32_t> cnt(n * na, 0);
  std::vector<std::vector<int64_t>> preds(n);
  for (long s = 0; s < n; ++s) {
    for (long a = 0; a < na; ++a) {
      long p = abs.pair(s, a);
      if (abs.status[p] != PairStatus::Usable || abs.succ[p].empty()) continue;
      int32_t c = 0;
      for (int32_t sp : abs.succ[p]) {
        if (!goal[sp]) {
          ++c;
          preds[sp].push_back(p);
        }
      }
      cnt[p] = c;
    }
  }

  for (long s = 0; s < n; ++s) {
    if (goal[s]) k.layer[s] = 0;
  }
  // layer 1: pairs whose successors already all sit in the goal
  std::vector<long> frontier, next;
  for (long p = 0; p < n * na; ++p) {
    if (abs.status[p] != PairStatus::Usable || abs.succ[p].empty() || cnt[p] != 0) continue;
    long s = p / na;
    if (k.layer[s] == kNotInDom) {
      k.layer[s] = 1;
      frontier.push_back(s);
    }
  }
  uint32_t level = 1;
  while (!frontier.empty()) {
    next.clear();
    for (long sp : frontier) {
      for (int64_t p : preds[sp]) {
        if (--cnt[p] == 0) {
          long s = p / na;
          if (k.layer[s] == kNotInDom) {
            k.layer[s] = level + 1;
            next.push_back(s);
          }
        }
      }
    }
    ++level;
    std::swap(frontier, next);
  }

  // enabled actions
  auto max_succ_layer = [&](long p) -> uint32_t {
    uint32_t m = 0;
    for (int32_t sp : abs.succ[p]) {
      if (k.layer[sp] == kNotInDom) return kNotInDom;
      m = std::max(m, k.layer[sp]);
    }
    return m;
  };
  for (long s = 0; s < n; ++s) {
    if (k.layer[s] == kNotInDom) continue;
    if (k.layer[s] > 0) {
      for (long a = 0; a < na; ++a) {
        long p = abs.pair(s, a);
        if (abs.status[p] != PairStatus::Usable || abs.succ[p].empty()) continue;
        uint32_t m = max_succ_layer(p);
        if (m != kNotInDom && m < k.layer[s]) k.enabled[s] |= uint64_t(1) << a;
      }
    } else {
      // goal state: stay inside the goal when possible, otherwise the
      // time-optimal re-entry actions
      uint64_t stay = 0;
      uint32_t best = kNotInDom;
      uint64_t best_set = 0;
      for (long a = 0; a < na; ++a) {
        long p = abs.pair(s, a);
        if (abs.status[p] != PairStatus::Usable || abs.succ[p].empty()) continue;
        bool in_goal = true;
        for (int32_t sp : abs.succ[p])
          if (!goal[sp]) { in_goal = false; break; }
        if (in_goal) stay |= uint64_t(1) << a;
        uint32_t m = max_succ_layer(p);
        if (m == kNotInDom) continue;
        if (m < best) {
          best = m;
          best_set = uint64_t(1) << a;
        } else if (m == best) {
          best_set |= uint64_t(1) << a;
        }
      }
      k.enabled[s] = stay != 0 ? stay : best_set;
    }
  }

  if (report) {
    report->goal_cells = 0;
    report->dom_size = 0;
    report->max_layer = 0;
    report->i_cells = 0;
    report->i_cells_covered = 0;
    report->pairs_admissible = 0;
    report->pairs_usable = 0;
    for (long p = 0; p < n * na; ++p) {
      if (abs.status[p] != PairStatus::Inadmissible) ++report->pairs_admissible;
      if (abs.status[p] == PairStatus::Usable) ++report->pairs_usable;
    }
    for (long s = 0; s < n; ++s) {
      if (goal[s]) ++report->goal_cells;
      if (k.in_dom(s)) {
        ++report->dom_size;
        if (k.layer[s] != kNotInDom) report->max_layer = std::max(report->max_layer, long(k.layer[s]));
      }
      if (init[s]) {
        ++report->i_cells;
        if (k.in_dom(s)) ++report->i_cells_covered;
      }
    }
    report->i_covered = report->i_cells_covered == report->i_cells;
    report->fixpoint_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return k;
}

std::optional<long> Controller::chosen_action(long s) const {
  if (!in_dom(s)) return std::nullopt;
  uint64_t bits = enabled[s];
  for (long a = 0; a < 64; ++a) {
    if (bits & (uint64_t(1) << a)) return a;
  }
  return std::nullopt;
}

std::string SynthesisReport::to_string() const {
  std::ostringstream os;
  os << "goal_cells=" << goal_cells << "\n"
     << "dom_size=" << dom_size << "\n"
     << "max_layer=" << max_layer << "\n"
     << "i_cells=" << i_cells << "\n"
     << "i_cells_covered=" << i_cells_covered << "\n"
     << "i_covered=" << (i_covered ? "true" : "false") << "\n"
     << "pairs_admissible=" << pairs_admissible << "\n"
     << "pairs_usable=" << pairs_usable << "\n";
  return os.str();
}

// --- worst-case distance oracle ---------------------------------------------

std::optional<long> j_strong_oracle(const ExplicitLts& l, const std::set<int>& goal, int s) {
  if (s < 0 || s >= l.nstates) throw std::out_of_range("j_strong_oracle: unknown state");
  const long kInf = -1;
  std::vector<long> J(l.nstates, kInf);
  // adjacency
  std::vector<std::vector<int>> succs(static_cast<size_t>(l.nstates) * l.nactions);
  std::vector<std::vector<int>> acts(l.nstates);
  for (const auto& [s0, a, s1] : l.transitions) {
    size_t p = static_cast<size_t>(s0) * l.nactions + a;
    if (succs[p].empty()) acts[s0].push_back(a);
    succs[p].push_back(s1);
  }
  for (int sweep = 0; sweep <= l.nstates + 1; ++sweep) {
    bool changed = false;
    for (int v = 0; v < l.nstates; ++v) {
      if (acts[v].empty()) continue;  // deadlock: stays +inf
      long worst = 0;
      bool ok = true;
      for (int a : acts[v]) {
        for (int sp : succs[static_cast<size_t>(v) * l.nactions + a]) {
          if (goal.count(sp)) continue;
          if (J[sp] == kInf) {
            ok = false;
            break;
          }
          worst = std::max(worst, J[sp]);
        }
        if (!ok) break;
      }
      if (ok) {
        long val = 1 + worst;
        if (J[v] != val) {
          J[v] = val;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  return J[s] == kInf ? std::nullopt : std::make_optional(J[s]);
}

// --- cell marking -----------------------------------------------------------

namespace {

std::pair<Rational, Rational> expr_range_over_box(
    const LinearExpr& e, const std::vector<std::string>& vars,
    const std::vector<std::pair<Rational, Rational>>& box) {
  Rational lo = e.constant(), hi = e.constant();
  for (const auto& [n, c] : e.terms()) {
    int idx = -1;
    for (size_t i = 0; i < vars.size(); ++i)
      if (vars[i] == n) { idx = static_cast<int>(i); break; }
    if (idx < 0) throw std::invalid_argument("cell marking: region mentions unknown variable '" + n + "'");
    if (c.sign() >= 0) {
      lo += c * box[idx].first;
      hi += c * box[idx].second;
    } else {
      lo += c * box[idx].second;
      hi += c * box[idx].first;
    }
  }
  return {lo, hi};
}

template <typename Check>
std::vector<uint8_t> mark_cells(const ConjunctivePredicate& region, const Quantization& q,
                                const StateLayout& layout, Check&& check) {
  std::vector<uint8_t> out(layout.size(), 1);
  CellCache cache(layout, q);
  std::vector<std::pair<Rational, Rational>> box(layout.vars.size());
  for (long s = 0; s < layout.size(); ++s) {
    long rem = s;
    for (size_t i = layout.vars.size(); i-- > 0;) {
      box[i] = cache.cells[i][rem % layout.count[i]];
      rem /= layout.count[i];
    }
    for (const auto& c : region.items) {
      auto [lo, hi] = expr_range_over_box(c.expr, layout.vars, box);
      if (!check(c, lo, hi)) {
        out[s] = 0;
        break;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<uint8_t> mark_cells_contained(const ConjunctivePredicate& region,
                                          const Quantization& q, const StateLayout& layout) {
  return mark_cells(region, q, layout,
                    [](const Constraint& c, const Rational& lo, const Rational& hi) {
                      switch (c.sense) {
                        case Sense::Le: return hi <= c.bound;
                        case Sense::Ge: return lo >= c.bound;
                        case Sense::Eq: return lo == c.bound && hi == c.bound;
                      }
                      return false;
                    });
}

std::vector<uint8_t> mark_cells_intersecting(const ConjunctivePredicate& region,
                                             const Quantization& q, const StateLayout& layout) {
  return mark_cells(region, q, layout,
                    [](const Constraint& c, const Rational& lo, const Rational& hi) {
                      switch (c.sense) {
                        case Sense::Le: return lo <= c.bound;
                        case Sense::Ge: return hi >= c.bound;
                        case Sense::Eq: return lo <= c.bound && hi >= c.bound;
                      }
                      return false;
                    });
}

// --- controller serialization -----------------------------------------------

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  put_u32(os, static_cast<uint32_t>(v));
  put_u32(os, static_cast<uint32_t>(v >> 32));
}

void put_i64(std::ostream& os, int64_t v) { put_u64(os, static_cast<uint64_t>(v)); }

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("controller file: truncated");
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

uint64_t get_u64(std::istream& is) {
  uint64_t lo = get_u32(is);
  uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

int64_t get_i64(std::istream& is) { return static_cast<int64_t>(get_u64(is)); }

std::string get_str(std::istream& is) {
  uint32_t n = get_u32(is);
  if (n > 4096) throw std::runtime_error("controller file: implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("controller file: truncated");
  return s;
}

constexpr char kMagic[8] = {'Q', 'S', 'Y', 'N', 'C', 'T', 'L', '1'};

void put_layout(std::ostream& os, const StateLayout& l) {
  put_u32(os, static_cast<uint32_t>(l.vars.size()));
  for (size_t i = 0; i < l.vars.size(); ++i) {
    put_str(os, l.vars[i]);
    put_i64(os, l.min_level[i]);
    put_i64(os, l.count[i]);
  }
}

StateLayout get_layout(std::istream& is) {
  StateLayout l;
  uint32_t n = get_u32(is);
  if (n > 64) throw std::runtime_error("controller file: implausible variable count");
  for (uint32_t i = 0; i < n; ++i) {
    l.vars.push_back(get_str(is));
    l.min_level.push_back(get_i64(is));
    l.count.push_back(get_i64(is));
    if (l.count.back() < 1) throw std::runtime_error("controller file: bad level count");
  }
  return l;
}

}  // namespace

void save_controller(const Controller& k, std::ostream& os) {
  os.write(kMagic, 8);
  put_u32(os, 1);  // version
  put_layout(os, k.states);
  put_layout(os, k.actions);
  const long n = k.states.size();
  for (long s = 0; s < n; ++s) {
    put_u32(os, k.layer[s]);
    put_u64(os, k.enabled[s]);
  }
}

Controller load_controller(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("controller file: bad magic");
  }
  uint32_t version = get_u32(is);
  if (version != 1) throw std::runtime_error("controller file: unsupported version");
  Controller k;
  k.states = get_layout(is);
  k.actions = get_layout(is);
  const long n = k.states.size();
  k.layer.resize(n);
  k.enabled.resize(n);
  for (long s = 0; s < n; ++s) {
    k.layer[s] = get_u32(is);
    k.enabled[s] = get_u64(is);
  }
  return k;
}

void write_region_csv(const Controller& k, const Quantization& q, std::ostream& os) {
  os << "index";
  for (const auto& v : k.states.vars) os << "," << v << "_level";
  for (const auto& v : k.states.vars) os << "," << v << "_lo," << v << "_hi";
  os << ",layer,actions\n";
  const long n = k.states.size();
  for (long s = 0; s < n; ++s) {
    if (!k.in_dom(s)) continue;
    AbstractState st = k.states.unpack(s);
    os << s;
    for (long lvl : st.levels) os << "," << lvl;
    for (size_t i = 0; i < k.states.vars.size(); ++i) {
      auto cell = q.map_of(k.states.vars[i]).cell(st.levels[i]);
      os << "," << cell.first << "," << cell.second;
    }
    os << "," << k.layer[s] << ",";
    bool first = true;
    for (long a = 0; a < 64; ++a) {
      if (k.enabled[s] & (uint64_t(1) << a)) {
        if (!first) os << ";";
        os << a;
        first = false;
      }
    }
    os << "\n";
  }
}

}  // namespace qsynth
