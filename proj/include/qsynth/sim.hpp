/*
 * sim.hpp
 *
 * Fine-timestep nonlinear plant simulator with sample-and-hold control
 * and multiplicative disturbance injection. The plant's continuous rates
 * are recovered from its discrete-time transition relation (x' = x + T f
 * per state variable) and integrated with explicit Euler at a step Ts
 * much smaller than the sampling period T.
 */

#ifndef QSYNTH_SIM_HPP
#define QSYNTH_SIM_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qsynth/codegen.hpp"
#include "qsynth/model.hpp"
#include "qsynth/quantize.hpp"

namespace qsynth {

// Quantized-state command source; both backends must agree bit-for-bit.
class ControlSource {
 public:
  virtual ~ControlSource() = default;
  virtual long long command(const std::vector<long>& levels) const = 0;
  virtual long long fault() const = 0;
};

class TableSource : public ControlSource {
 public:
  explicit TableSource(ControlTable t) : table_(std::move(t)) {}
  long long command(const std::vector<long>& levels) const override { return table_.lookup(levels); }
  long long fault() const override { return table_.fault; }

 private:
  ControlTable table_;
};

class DagSource : public ControlSource {
 public:
  explicit DagSource(DecisionDag d) : dag_(std::move(d)) {}
  long long command(const std::vector<long>& levels) const override { return dag_.eval(levels); }
  long long fault() const override { return dag_.fault; }

 private:
  DecisionDag dag_;
};

struct SimConfig {
  const Dths* plant = nullptr;              // deterministic, no auxiliaries
  const Quantization* quant = nullptr;      // admissible region + AD maps
  const ControlSource* controller = nullptr;  // null: apply fixed_command
  const ConjunctivePredicate* goal = nullptr;  // evaluated at ticks (already relaxed)
  long long fixed_command = 0;              // used when controller is null
  double T = 0.1;                           // sampling period (s)
  double Ts = 1e-4;                         // integration step (s); T/Ts integral
  double model_T = 0.1;                     // T built into the plant's transition relation
  double disturbance = 0.0;                 // d: increments scaled by (1 + delta), |delta| <= d
  bool additive_disturbance = false;        // alternative model for sensitivity studies
  uint64_t seed = 0;
  double horizon = 40.0;                    // simulated seconds
  std::vector<double> x0;
};

struct Trajectory {
  std::vector<double> times;                 // controller ticks
  std::vector<std::vector<double>> states;   // per tick
  std::vector<long long> commands;           // command held from this tick
  std::vector<uint8_t> in_goal;              // goal membership per tick
  double reached_goal_time = -1.0;           // first tick in goal; < 0 = never
  bool stayed_in_goal = false;               // never left after first entry
  bool left_admissible = false;              // truncated: state exited A
  bool fault = false;                        // truncated: ctrlRegion rejected the state

  // first tick from which the state stays in the goal for >= window secs
  std::optional<double> settle_time(double window) const;
  // max |x1| over ticks after the settle point
  double ripple_after(double settle) const;
};

Trajectory simulate(const SimConfig& cfg);

void write_trajectory_csv(const Trajectory& t, const std::vector<std::string>& var_names,
                          std::ostream& os);

struct BatchResult {
  int runs = 0;
  int successes = 0;
  double mean_settle = 0.0;  // over successful runs
  double max_settle = 0.0;
  double max_ripple = 0.0;

  std::string to_string() const;  // fixed key order
};

// Grid of initial states crossed with seeds; success = settles within
// `deadline` and stays in the goal for >= `stay_window` seconds.
BatchResult batch(const SimConfig& base, const std::vector<std::vector<double>>& initials,
                  const std::vector<uint64_t>& seeds, double deadline, double stay_window);

}  // namespace qsynth

#endif  // QSYNTH_SIM_HPP
