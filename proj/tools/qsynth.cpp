/*
 * qsynth.cpp
 *
 * Command-line front end: synthesis, simulation, batch evaluation,
 * region/controller exports and the LP debug solver.
 */

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qsynth/builtins.hpp"
#include "qsynth/codegen.hpp"
#include "qsynth/linearize.hpp"
#include "qsynth/modelfile.hpp"
#include "qsynth/sim.hpp"
#include "qsynth/synth.hpp"

using namespace qsynth;

namespace {

std::map<std::string, Rational> parse_param_overrides(const std::vector<std::string>& kv) {
  std::map<std::string, Rational> out;
  for (const auto& s : kv) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw std::runtime_error("--param expects NAME=VALUE, got '" + s + "'");
    out[s.substr(0, eq)] = Rational::from_string(s.substr(eq + 1));
  }
  return out;
}

int threads_from(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("QSYNTH_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;  // engine default: hardware concurrency
}

struct Pipeline {
  ParsedModel model;
  LinearizationResult lin;
  Rational eps;
};

Pipeline build_pipeline(const std::string& path, const std::vector<std::string>& params,
                        int cells, bool tight_sin, const std::string& margin) {
  Pipeline p{parse_model_file(path, parse_param_overrides(params)), {}, Rational(0)};
  Rational m = Rational::from_string(margin);
  auto envs = default_envelopes(p.model.system, cells, tight_sin ? SinMode::Tight : SinMode::Paper, m);
  p.lin = linearize(p.model.system, envs);
  auto it = p.model.params.find("eps");
  p.eps = it != p.model.params.end() ? it->second : p.model.quant.step();
  return p;
}

Controller load_controller_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open controller file '" + path + "'");
  return load_controller(f);
}

void check_layout(const Controller& k, const Pipeline& p) {
  StateLayout expect = state_layout(p.lin.system, p.model.quant);
  if (k.states.vars != expect.vars || k.states.min_level != expect.min_level ||
      k.states.count != expect.count) {
    throw std::runtime_error("controller does not match the model's quantization");
  }
}

std::vector<double> parse_x0(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::unique_ptr<ControlSource> make_source(const Controller& k, const std::string& backend) {
  CodegenSpec spec{k, natural_action_commands(k), -9999};
  if (backend == "dag") return std::make_unique<DagSource>(build_decision_dag(spec));
  std::stringstream buf;
  emit_table(spec, buf);
  return std::make_unique<TableSource>(load_table(buf));
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantized controller synthesis for nonlinear discrete-time systems"};
  app.require_subcommand(1);

  // shared flags
  std::string model_path, controller_path, out_path, csv_path, margin = "1/1000000000";
  std::vector<std::string> params;
  int cells = 4, threads_flag = 0;
  bool tight_sin = false, verbose = false;

  auto add_model_flags = [&](CLI::App* c) {
    c->add_option("model", model_path, "model file")->required();
    c->add_option("--param", params, "override a model parameter, NAME=VALUE");
    c->add_option("--cells", cells, "envelope cells per nonlinear term");
    c->add_flag("--tight-sin", tight_sin, "full-precision sine envelope coefficients");
    c->add_option("--margin", margin, "envelope safety margin (rational)");
  };

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "synthesize a controller");
  add_model_flags(synth);
  synth->add_option("--out", out_path, "controller dump path");
  synth->add_option("--threads", threads_flag, "worker threads (or QSYNTH_THREADS)");
  synth->add_flag("--verbose", verbose, "progress notes on stderr");
  std::string eps_flag;
  synth->add_option("--eps", eps_flag, "goal relaxation radius (default: quantization step)");

  // --- simulate ---
  auto* sim = app.add_subcommand("simulate", "closed-loop simulation against the nonlinear plant");
  add_model_flags(sim);
  std::string x0_str, backend = "table";
  double dist = 0.0, ts = 1e-4, horizon = 40.0;
  uint64_t seed = 0;
  sim->add_option("--controller", controller_path, "controller dump")->required();
  sim->add_option("--x0", x0_str, "initial state, comma separated")->required();
  sim->add_option("--seed", seed, "disturbance seed");
  sim->add_option("--d", dist, "disturbance fraction, up to 0.04");
  sim->add_option("--ts", ts, "integration step (s)");
  sim->add_option("--horizon", horizon, "simulated seconds");
  sim->add_option("--csv", csv_path, "trajectory CSV path");
  sim->add_option("--backend", backend, "table | dag");
  bool additive = false;
  sim->add_flag("--additive-disturbance", additive, "add noise instead of scaling increments");

  // --- batch ---
  auto* bat = app.add_subcommand("batch", "batch simulations over initial states and seeds");
  add_model_flags(bat);
  std::vector<std::string> x0_list;
  int nseeds = 1;
  uint64_t seed_base = 1;
  double deadline = 30.0, window = 10.0;
  bat->add_option("--controller", controller_path, "controller dump")->required();
  bat->add_option("--x0", x0_list, "initial state (repeatable)")->required();
  bat->add_option("--seeds", nseeds, "number of seeds per initial state");
  bat->add_option("--seed-base", seed_base, "first seed value");
  bat->add_option("--d", dist, "disturbance fraction");
  bat->add_option("--ts", ts, "integration step (s)");
  bat->add_option("--horizon", horizon, "simulated seconds");
  bat->add_option("--deadline", deadline, "settle deadline (s)");
  bat->add_option("--window", window, "stay window (s)");

  // --- region ---
  auto* reg = app.add_subcommand("region", "export the controllable region as CSV");
  add_model_flags(reg);
  reg->add_option("--controller", controller_path, "controller dump")->required();
  reg->add_option("--out", out_path, "output path (default stdout)");

  // --- export-c / export-table ---
  auto* exc = app.add_subcommand("export-c", "emit the control software as ISO C");
  add_model_flags(exc);
  exc->add_option("--controller", controller_path, "controller dump")->required();
  exc->add_option("--out", out_path, "output path (default stdout)");

  auto* ext = app.add_subcommand("export-table", "emit the flat controller table");
  add_model_flags(ext);
  ext->add_option("--controller", controller_path, "controller dump")->required();
  ext->add_option("--out", out_path, "output path")->required();

  // --- lp ---
  auto* lp = app.add_subcommand("lp", "solve an LP/MILP debug file");
  std::string lp_path;
  lp->add_option("file", lp_path, "LP file")->required();

  // --- envelope-dump ---
  auto* env = app.add_subcommand("envelope-dump", "per-cell envelope lines as CSV");
  add_model_flags(env);
  env->add_option("--out", out_path, "output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      auto t0 = std::chrono::steady_clock::now();
      Pipeline p = build_pipeline(model_path, params, cells, tight_sin, margin);
      if (!eps_flag.empty()) p.eps = Rational::from_string(eps_flag);
      SynthOptions opt;
      opt.threads = threads_from(threads_flag);
      opt.verbose = verbose;
      AbstractionTable abs = abstract_system(p.lin.system, p.model.quant, opt);
      auto goal = mark_cells_contained(relax_goal(p.model.problem.goal, p.eps), p.model.quant,
                                       abs.states);
      auto init = mark_cells_intersecting(p.model.problem.initial, p.model.quant, abs.states);
      SynthesisReport rep;
      Controller k = solve_strong(abs, goal, init, &rep);
      double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << rep.to_string();
      std::cout << "eps=" << p.eps.to_string() << "\n";
      char buf[64];
      std::snprintf(buf, sizeof buf, "wall_seconds=%.2f\n", wall);
      std::cout << buf;
      if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + out_path + "'");
        save_controller(k, f);
      }
      if (!rep.i_covered) {
        std::cout << "I not covered\n";
        return 2;
      }
      return 0;
    }

    if (sim->parsed()) {
      Pipeline p = build_pipeline(model_path, params, cells, tight_sin, margin);
      Controller k = load_controller_file(controller_path);
      check_layout(k, p);
      auto src = make_source(k, backend);
      ConjunctivePredicate goal = relax_goal(p.model.problem.goal, p.eps);
      SimConfig cfg;
      cfg.plant = &p.model.system;
      cfg.quant = &p.model.quant;
      cfg.controller = src.get();
      cfg.goal = &goal;
      cfg.T = p.model.param_or("T", Rational(1, 10)).to_double();
      cfg.model_T = cfg.T;
      cfg.Ts = ts;
      cfg.disturbance = dist;
      cfg.additive_disturbance = additive;
      cfg.seed = seed;
      cfg.horizon = horizon;
      cfg.x0 = parse_x0(x0_str);
      Trajectory tr = simulate(cfg);
      if (!csv_path.empty()) {
        std::ofstream f(csv_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + csv_path + "'");
        std::vector<std::string> names;
        for (const auto& v : p.model.system.state) names.push_back(v.name);
        write_trajectory_csv(tr, names, f);
      }
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "{\"reached_goal_s\": %.6g, \"stayed_in_goal\": %s, "
                    "\"left_admissible\": %s, \"fault\": %s, \"ticks\": %zu}\n",
                    tr.reached_goal_time, tr.stayed_in_goal ? "true" : "false",
                    tr.left_admissible ? "true" : "false", tr.fault ? "true" : "false",
                    tr.times.size());
      std::cout << buf;
      return (tr.left_admissible || tr.fault) ? 3 : 0;
    }

    if (bat->parsed()) {
      Pipeline p = build_pipeline(model_path, params, cells, tight_sin, margin);
      Controller k = load_controller_file(controller_path);
      check_layout(k, p);
      auto src = make_source(k, "table");
      ConjunctivePredicate goal = relax_goal(p.model.problem.goal, p.eps);
      SimConfig cfg;
      cfg.plant = &p.model.system;
      cfg.quant = &p.model.quant;
      cfg.controller = src.get();
      cfg.goal = &goal;
      cfg.T = p.model.param_or("T", Rational(1, 10)).to_double();
      cfg.model_T = cfg.T;
      cfg.Ts = ts;
      cfg.disturbance = dist;
      cfg.horizon = horizon;
      std::vector<std::vector<double>> initials;
      for (const auto& s : x0_list) initials.push_back(parse_x0(s));
      std::vector<uint64_t> seeds;
      for (int i = 0; i < nseeds; ++i) seeds.push_back(seed_base + static_cast<uint64_t>(i));
      BatchResult r = batch(cfg, initials, seeds, deadline, window);
      std::cout << r.to_string() << "\n";
      return r.successes == r.runs ? 0 : 4;
    }

    if (reg->parsed()) {
      Pipeline p = build_pipeline(model_path, params, cells, tight_sin, margin);
      Controller k = load_controller_file(controller_path);
      check_layout(k, p);
      std::ostringstream os;
      write_region_csv(k, p.model.quant, os);
      write_out(out_path, os.str());
      return 0;
    }

    if (exc->parsed()) {
      Pipeline p = build_pipeline(model_path, params, cells, tight_sin, margin);
      Controller k = load_controller_file(controller_path);
      check_layout(k, p);
      CodegenSpec spec{std::move(k), {}, -9999};
      spec.action_commands = natural_action_commands(spec.controller);
      write_out(out_path, emit_c(spec));
      return 0;
    }

    if (ext->parsed()) {
      Pipeline p = build_pipeline(model_path, params, cells, tight_sin, margin);
      Controller k = load_controller_file(controller_path);
      check_layout(k, p);
      CodegenSpec spec{std::move(k), {}, -9999};
      spec.action_commands = natural_action_commands(spec.controller);
      std::ofstream f(out_path, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write '" + out_path + "'");
      emit_table(spec, f);
      return 0;
    }

    if (lp->parsed()) {
      MilpProblem prob = parse_lp_file(lp_path);
      MilpResult res = solve(prob);
      if (res.status == MilpStatus::Infeasible) {
        std::cout << "status=infeasible\n";
        return 1;
      }
      std::cout << "status=optimal\n";
      if (res.value) std::cout << "value=" << res.value->to_string() << "\n";
      if (res.witness) {
        for (const auto& [n, v] : *res.witness) std::cout << n << "=" << v.to_string() << "\n";
      }
      return 0;
    }

    if (env->parsed()) {
      ParsedModel m = parse_model_file(model_path, parse_param_overrides(params));
      auto envs = default_envelopes(m.system, cells, tight_sin ? SinMode::Tight : SinMode::Paper,
                                    Rational::from_string(margin));
      std::ostringstream os;
      os << "term,cell,lo,hi,f_minus_slope,f_minus_const,f_plus_slope,f_plus_const\n";
      for (const auto& [key, e] : envs) {
        for (size_t i = 0; i < e.cells.size(); ++i) {
          const EnvelopeCell& c = e.cells[i];
          os << key << "," << i << "," << c.cell.iv[0].first << "," << c.cell.iv[0].second << ","
             << c.lo_slope[0] << "," << c.lo_const << "," << c.hi_slope[0] << "," << c.hi_const
             << "\n";
        }
      }
      write_out(out_path, os.str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
