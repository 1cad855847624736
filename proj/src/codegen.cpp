#include "qsynth/codegen.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qsynth {

void CodegenSpec::validate() const {
  bool any = false;
  for (long s = 0; s < controller.states.size(); ++s) {
    if (controller.in_dom(s)) { any = true; break; }
  }
  if (!any) throw std::invalid_argument("codegen: empty controller");
  std::set<long long> seen;
  for (const auto& [a, cmd] : action_commands) {
    (void)a;
    if (cmd == fault_command) throw std::invalid_argument("codegen: a command collides with the fault value");
    if (!seen.insert(cmd).second) throw std::invalid_argument("codegen: action encoding is not injective");
  }
}

std::map<long, long long> natural_action_commands(const Controller& k) {
  std::map<long, long long> out;
  const long na = k.actions.size();
  for (long a = 0; a < na; ++a) {
    AbstractState t = k.actions.unpack(a);
    out[a] = k.actions.vars.size() == 1 ? t.levels[0] : a;
  }
  return out;
}

namespace {

int bits_for(long count) {
  int b = 0;
  while ((1L << b) < count) ++b;
  return b == 0 ? 1 : b;
}

struct DagBuilder {
  const CodegenSpec& spec;
  DecisionDag dag;
  std::map<std::tuple<int, int, int>, int> node_memo;
  std::map<long long, int> leaf_memo;

  explicit DagBuilder(const CodegenSpec& s) : spec(s) {}

  int leaf(long long v) {
    auto it = leaf_memo.find(v);
    if (it != leaf_memo.end()) return it->second;
    int id = static_cast<int>(dag.leaves.size());
    dag.leaves.push_back(v);
    leaf_memo[v] = ~id;
    return ~id;
  }

  int node(int bit, int lo, int hi) {
    if (lo == hi) return lo;  // redundant test: both branches identical
    auto key = std::make_tuple(bit, lo, hi);
    auto it = node_memo.find(key);
    if (it != node_memo.end()) return it->second;
    int id = static_cast<int>(dag.nodes.size());
    dag.nodes.push_back({bit, lo, hi});
    node_memo[key] = id;
    return id;
  }

  // var v, already-fixed high bits give `off`, `bit` bits of v remain;
  // `below` = total bits remaining in later variables
  int build(size_t v, long off, int bit, int below, long packed) {
    const StateLayout& st = spec.controller.states;
    if (v == st.vars.size()) {
      long long cmd = spec.fault_command;
      if (spec.controller.in_dom(packed)) {
        auto a = spec.controller.chosen_action(packed);
        cmd = spec.action_commands.at(*a);
      }
      return leaf(cmd);
    }
    if (bit == 0) {
      if (off >= st.count[v]) return leaf(spec.fault_command);
      int nb = static_cast<int>(v + 1 < st.vars.size() ? below - dag.var_bits[v + 1] : 0);
      return build(v + 1, 0, v + 1 < st.vars.size() ? dag.var_bits[v + 1] : 0, nb,
                   packed * st.count[v] + off);
    }
    // prune subtrees that are entirely out of range
    if (off >= st.count[v]) return leaf(spec.fault_command);
    int pos = below + bit - 1;  // bit position counted from the walk's end
    int lo = build(v, off << 1, bit - 1, below, packed);
    int hi = build(v, (off << 1) | 1, bit - 1, below, packed);
    return node(pos, lo, hi);
  }

  void run() {
    const StateLayout& st = spec.controller.states;
    dag.states = st;
    dag.fault = spec.fault_command;
    dag.total_bits = 0;
    for (long c : st.count) {
      dag.var_bits.push_back(bits_for(c));
      dag.total_bits += dag.var_bits.back();
    }
    int below = dag.total_bits - dag.var_bits[0];
    dag.root = build(0, 0, dag.var_bits[0], below, 0);
  }
};

}  // namespace

DecisionDag build_decision_dag(const CodegenSpec& spec) {
  spec.validate();
  DagBuilder b(spec);
  b.run();
  return b.dag;
}

long long DecisionDag::eval(const std::vector<long>& levels) const {
  if (levels.size() != states.vars.size()) throw std::invalid_argument("dag: arity mismatch");
  // concatenated offset bits, variable-major, MSB first
  std::vector<int> bits(total_bits, 0);
  int p = total_bits;
  for (size_t v = 0; v < states.vars.size(); ++v) {
    long off = levels[v] - states.min_level[v];
    if (off < 0 || off >= (1L << var_bits[v])) return fault;
    for (int j = var_bits[v] - 1; j >= 0; --j) {
      bits[--p] = static_cast<int>((off >> j) & 1);
    }
  }
  // bits[k] = bit at position k counted from the end of the walk
  int cur = root;
  while (cur >= 0) {
    const Node& n = nodes[cur];
    cur = bits[n.bit] ? n.hi : n.lo;
  }
  return leaves[~cur];
}

int DecisionDag::max_depth() const {
  std::vector<int> depth(nodes.size(), -1);
  // children have smaller ids than parents (post-order construction)
  int best = 0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    auto d = [&](int c) { return c < 0 ? 0 : depth[c]; };
    depth[i] = 1 + std::max(d(nodes[i].lo), d(nodes[i].hi));
    best = std::max(best, depth[i]);
  }
  return best;
}

std::string emit_c(const CodegenSpec& spec) {
  DecisionDag dag = build_decision_dag(spec);
  const StateLayout& st = spec.controller.states;
  std::ostringstream os;
  os << "/* Generated quantized feedback controller.\n"
     << " * Inputs are quantized state levels, one per state variable.\n"
     << " * ctrlRegion returns 1 when the state is controllable;\n"
     << " * ctrlLaw returns the command for it (CTRL_FAULT otherwise).\n"
     << " */\n\n";
  os << "#define CTRL_FAULT " << spec.fault_command << "L\n";
  os << "#define CTRL_STATE_VARS " << st.vars.size() << "\n\n";

  os << "static long ctrl_lookup(const long *levels)\n{\n";
  // per-variable offsets and range checks, unrolled
  for (size_t v = 0; v < st.vars.size(); ++v) {
    os << "    const long off" << v << " = levels[" << v << "] - (" << st.min_level[v] << "L);\n";
  }
  for (size_t v = 0; v < st.vars.size(); ++v) {
    os << "    if (off" << v << " < 0L || off" << v << " >= " << st.count[v] << "L) return CTRL_FAULT;\n";
  }
  // bit probes: position -> (variable, shift)
  os << "\n";
  if (dag.root >= 0) {
    os << "    goto n" << dag.root << ";\n";
  } else {
    os << "    return " << dag.leaves[~dag.root] << "L;\n";
  }
  // map walk positions back to variable-local shifts
  std::vector<std::pair<size_t, int>> pos_of(dag.total_bits);
  {
    int p = dag.total_bits;
    for (size_t v = 0; v < st.vars.size(); ++v) {
      for (int j = dag.var_bits[v] - 1; j >= 0; --j) pos_of[--p] = {v, j};
    }
  }
  auto leaf_label = [&](int ref) { return "l" + std::to_string(~ref); };
  for (size_t i = dag.nodes.size(); i-- > 0;) {
    const DecisionDag::Node& n = dag.nodes[i];
    auto [v, shift] = pos_of[n.bit];
    auto target = [&](int c) {
      return c >= 0 ? "n" + std::to_string(c) : leaf_label(c);
    };
    os << "n" << i << ":\n    if ((off" << v << " >> " << shift << ") & 1L) goto " << target(n.hi)
       << "; else goto " << target(n.lo) << ";\n";
  }
  for (size_t l = 0; l < dag.leaves.size(); ++l) {
    os << "l" << l << ":\n    return " << dag.leaves[l] << "L;\n";
  }
  os << "}\n\n";
  os << "int ctrlRegion(const long *levels)\n{\n"
     << "    return ctrl_lookup(levels) != CTRL_FAULT;\n"
     << "}\n\n";
  os << "long ctrlLaw(const long *levels)\n{\n"
     << "    return ctrl_lookup(levels);\n"
     << "}\n";
  return os.str();
}

// --- flat table -------------------------------------------------------------

namespace {

constexpr char kTabMagic[8] = {'Q', 'S', 'T', 'A', 'B', '0', '0', '1'};

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_i64(std::ostream& os, int64_t v) {
  put_u32(os, static_cast<uint32_t>(static_cast<uint64_t>(v)));
  put_u32(os, static_cast<uint32_t>(static_cast<uint64_t>(v) >> 32));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("table file: truncated");
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

int64_t get_i64(std::istream& is) {
  uint64_t lo = get_u32(is);
  uint64_t hi = get_u32(is);
  return static_cast<int64_t>(lo | (hi << 32));
}

}  // namespace

void emit_table(const CodegenSpec& spec, std::ostream& os) {
  spec.validate();
  const StateLayout& st = spec.controller.states;
  os.write(kTabMagic, 8);
  put_u32(os, 1);  // version
  put_u32(os, static_cast<uint32_t>(st.vars.size()));
  put_u32(os, 8);  // entry width in bytes
  for (size_t v = 0; v < st.vars.size(); ++v) {
    put_i64(os, st.min_level[v]);
    put_i64(os, st.count[v]);
  }
  put_i64(os, spec.fault_command);
  const long n = st.size();
  for (long s = 0; s < n; ++s) {
    long long cmd = spec.fault_command;
    if (spec.controller.in_dom(s)) {
      cmd = spec.action_commands.at(*spec.controller.chosen_action(s));
    }
    put_i64(os, cmd);
  }
}

ControlTable load_table(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kTabMagic, 8) != 0) throw std::runtime_error("table file: bad magic");
  if (get_u32(is) != 1) throw std::runtime_error("table file: unsupported version");
  uint32_t nvars = get_u32(is);
  if (nvars == 0 || nvars > 64) throw std::runtime_error("table file: implausible variable count");
  uint32_t width = get_u32(is);
  if (width != 8) throw std::runtime_error("table file: unsupported entry width");
  ControlTable t;
  for (uint32_t v = 0; v < nvars; ++v) {
    t.states.vars.push_back("v" + std::to_string(v));
    t.states.min_level.push_back(get_i64(is));
    t.states.count.push_back(get_i64(is));
    if (t.states.count.back() < 1) throw std::runtime_error("table file: bad level count");
  }
  t.fault = get_i64(is);
  const long n = t.states.size();
  t.entries.resize(n);
  for (long s = 0; s < n; ++s) t.entries[s] = get_i64(is);
  return t;
}

long long ControlTable::lookup(const std::vector<long>& levels) const {
  if (levels.size() != states.vars.size()) throw std::invalid_argument("table: arity mismatch");
  AbstractState s{levels};
  if (!states.contains(s)) return fault;
  return entries[states.pack(s)];
}

}  // namespace qsynth
