#pragma once

// State encoding, actions, rewards and the environment transition.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "autoindex/benchmark.hpp"
#include "autoindex/bits.hpp"
#include "autoindex/catalog.hpp"
#include "autoindex/workload.hpp"

namespace autoindex {

// Binary state I ++ Q of length 2C.
struct StateVector {
  BitVector bits;

  std::size_t size() const { return bits.size(); }
  std::size_t columns() const { return bits.size() / 2; }
  BitVector index_half() const { return {bits.begin(), bits.begin() + static_cast<long>(columns())}; }
  BitVector usage_half() const { return {bits.begin() + static_cast<long>(columns()), bits.end()}; }

  friend bool operator==(const StateVector&, const StateVector&) = default;
};

inline StateVector encode_state(const IndexConfiguration& config, const UsageTracker& tracker) {
  if (config.size() != tracker.columns())
    throw std::invalid_argument("configuration and usage tracker disagree on column count");
  StateVector state;
  state.bits = config.bits();
  auto usage = tracker.usage_vector(config);
  state.bits.insert(state.bits.end(), usage.begin(), usage.end());
  return state;
}

struct Flip {
  std::size_t column;
  friend bool operator==(const Flip&, const Flip&) = default;
};
struct NoOp {
  friend bool operator==(const NoOp&, const NoOp&) = default;
};
using Action = std::variant<Flip, NoOp>;

// Actions are numbered 0..C-1 for flips and C for the no-op.
inline std::size_t action_count(std::size_t columns) { return columns + 1; }

inline Action action_from_index(std::size_t index, std::size_t columns) {
  if (index > columns) throw std::out_of_range("action index out of range");
  if (index == columns) return NoOp{};
  return Flip{index};
}

inline std::size_t action_index(const Action& action, std::size_t columns) {
  if (const auto* flip = std::get_if<Flip>(&action)) return flip->column;
  return columns;
}

inline std::string describe(const Action& action, const SchemaCatalog* catalog = nullptr) {
  if (const auto* flip = std::get_if<Flip>(&action)) {
    return "flip:" + (catalog ? catalog->qualified_name(flip->column) : std::to_string(flip->column));
  }
  return "noop";
}

constexpr double kMatchReward = 1.0;
constexpr double kMismatchReward = -5.0;
constexpr double kNoOpReward = 0.0;

// op: 1 if the flip created the index, 0 if it dropped it.
// use: 1 if the windowed queries benefit from an index on that column.
inline double compute_reward(int op, int use) {
  if ((op != 0 && op != 1) || (use != 0 && use != 1))
    throw std::invalid_argument("reward arguments must be 0 or 1");
  const double o = op, u = use;
  return (1 - o) * ((1 - u) * kMatchReward + u * kMismatchReward) +
         o * ((1 - u) * kMismatchReward + u * kMatchReward);
}

struct StepInfo {
  std::vector<int> queries;
  std::optional<BackendCommand> command;
  bool command_changed = false;
  double simulated_seconds = 0.0;
};

struct StepOutcome {
  StateVector next_state;
  double reward = 0.0;
  StepInfo info;
};

// One transition. The step's queries are observed first, then the action is
// applied, then the reward is taken against the demand of the updated window.
// The reward's `use` is the counterfactual demand for the column, not the
// Q-half of the state: Q is zero for every unindexed column, so after a drop
// it would carry no information.
inline StepOutcome transition(IndexBackend& backend, UsageTracker& tracker, const WorkloadSpec& workload,
                              const Action& action, std::uint64_t step_index,
                              std::size_t queries_per_step) {
  const auto columns = backend.configuration().size();
  if (action_index(action, columns) > columns) throw std::out_of_range("flip column out of range");

  StepOutcome out;
  for (std::size_t q = 0; q < queries_per_step; ++q) {
    const auto& query = next_query(workload, step_index * queries_per_step + q);
    tracker.observe(query);
    out.info.queries.push_back(query.id);
  }

  if (const auto* flip = std::get_if<Flip>(&action)) {
    const bool create = !backend.configuration().indexed(flip->column);
    BackendCommand cmd{create ? CommandKind::CreateIndex : CommandKind::DropIndex, flip->column, step_index};
    out.info.command_changed = backend.apply(cmd).changed;
    out.info.command = cmd;
    out.reward = compute_reward(create ? 1 : 0, tracker.demanded(flip->column) ? 1 : 0);
  } else {
    out.reward = kNoOpReward;
  }
  out.next_state = encode_state(backend.configuration(), tracker);
  return out;
}

struct EnvironmentOptions {
  std::size_t horizon = 22;
  std::size_t queries_per_step = 1;
  CostModel cost_model;
};

// Owns the configuration (through its backend), the usage window and the
// workload position for one run.
class Environment {
 public:
  Environment(std::size_t columns, WorkloadSpec workload, EnvironmentOptions options,
              std::unique_ptr<IndexBackend> backend = nullptr)
      : columns_(columns),
        workload_(std::move(workload)),
        options_(options),
        backend_(backend ? std::move(backend) : std::make_unique<SimulatedBackend>(columns)),
        tracker_(options.horizon, columns),
        timing_rng_(options.cost_model.seed) {
    validate(workload_, columns_);
    options_.cost_model.validate();
    if (backend_->configuration().size() != columns_)
      throw std::invalid_argument("backend configuration size does not match column count");
  }

  void reset() { reset(IndexConfiguration(columns_)); }

  void reset(const IndexConfiguration& config) {
    if (config.size() != columns_) throw std::invalid_argument("reset configuration has wrong size");
    backend_->reset(config);
    tracker_.clear();
    step_ = 0;
    timing_rng_.seed(options_.cost_model.seed);
  }

  // Puts the environment where it would be after `steps` steps ending in
  // `config`. The usage window and workload position depend on the step
  // count alone, so they are rebuilt by replaying the last H queries.
  void restore(const IndexConfiguration& config, std::uint64_t steps) {
    reset(config);
    const auto observed = steps * options_.queries_per_step;
    const auto from = observed > tracker_.horizon() ? observed - tracker_.horizon() : 0;
    for (auto q = from; q < observed; ++q) tracker_.observe(next_query(workload_, q));
    step_ = steps;
  }

  StepOutcome step(const Action& action) {
    const auto before = backend_->configuration();
    auto out = transition(*backend_, tracker_, workload_, action, step_, options_.queries_per_step);
    for (std::size_t q = 0; q < options_.queries_per_step; ++q) {
      const auto& query = next_query(workload_, step_ * options_.queries_per_step + q);
      out.info.simulated_seconds += simulate_time(query, before, options_.cost_model, timing_rng_);
    }
    ++step_;
    return out;
  }

  StateVector state() const { return encode_state(backend_->configuration(), tracker_); }
  const IndexConfiguration& configuration() const { return backend_->configuration(); }
  const UsageTracker& tracker() const { return tracker_; }
  UsageTracker& tracker() { return tracker_; }
  const IndexBackend& backend() const { return *backend_; }
  const WorkloadSpec& workload() const { return workload_; }
  const EnvironmentOptions& options() const { return options_; }
  std::size_t columns() const { return columns_; }
  std::uint64_t steps_taken() const { return step_; }

  // Segment whose queries the next step will observe.
  std::size_t active_segment() const {
    return segment_at(workload_, step_ * options_.queries_per_step);
  }

 private:
  std::size_t columns_;
  WorkloadSpec workload_;
  EnvironmentOptions options_;
  std::unique_ptr<IndexBackend> backend_;
  UsageTracker tracker_;
  std::uint64_t step_ = 0;
  std::mt19937_64 timing_rng_;
};

struct TraceRow {
  std::uint64_t step;
  Action action;
  double reward;
  std::size_t total_indexes;
  std::size_t optimal_indexes;
};

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows,
                            const SchemaCatalog* catalog = nullptr) {
  out << "step,action,reward,total_indexes,total_optimal_indexes\n";
  for (const auto& r : rows) {
    out << r.step << ',' << describe(r.action, catalog) << ',' << r.reward << ',' << r.total_indexes
        << ',' << r.optimal_indexes << '\n';
  }
}

}  // namespace autoindex
