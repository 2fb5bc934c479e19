#pragma once

// Epsilon-greedy Q-learning with experience replay over the indexing
// environment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "autoindex/environment.hpp"
#include "autoindex/qfunction.hpp"

namespace autoindex {

struct EpsilonSchedule {
  double initial = 1.0;
  double final = 0.01;
  double decay = 0.99;        // multiplicative, applied once per interval
  std::uint64_t interval = 128;
};

inline double epsilon_at(const EpsilonSchedule& schedule, std::uint64_t step) {
  const auto decays = static_cast<double>(step / schedule.interval);
  return std::max(schedule.final, schedule.initial * std::pow(schedule.decay, decays));
}

struct Experience {
  StateVector state;
  std::size_t action;
  double reward;
  StateVector next_state;
};

// Fixed-capacity FIFO. Index 0 is the oldest stored experience.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay memory capacity must be positive");
    buffer_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void store(Experience e) {
    if (buffer_.size() < capacity_) {
      buffer_.push_back(std::move(e));
    } else {
      buffer_[head_] = std::move(e);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& operator[](std::size_t i) const { return buffer_[(head_ + i) % buffer_.size()]; }

  // Distinct indices, uniform without replacement.
  template <class Rng>
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    if (count > size()) throw std::invalid_argument("cannot sample more experiences than stored");
    std::vector<std::size_t> all(size()), picked;
    std::iota(all.begin(), all.end(), std::size_t{0});
    picked.reserve(count);
    std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
    return picked;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Experience> buffer_;
};

// Ties among maximal values are broken uniformly at random.
template <class Rng>
std::size_t argmax_random_tie(const Eigen::VectorXd& values, Rng& rng) {
  const double best = values.maxCoeff();
  std::vector<std::size_t> ties;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values[i] == best) ties.push_back(static_cast<std::size_t>(i));
  if (ties.size() == 1) return ties.front();
  std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
  return ties[pick(rng)];
}

template <class Rng>
std::size_t select_action_index(const Eigen::VectorXd& values, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> any(0, static_cast<std::size_t>(values.size()) - 1);
    return any(rng);
  }
  return argmax_random_tie(values, rng);
}

template <class Rng>
Action select_action(const QNetwork& net, const StateVector& state, double epsilon, Rng& rng) {
  const auto columns = net.shape().columns;
  return action_from_index(select_action_index(net.forward(state.bits), epsilon, rng), columns);
}

struct TrainingConfig {
  double learning_rate = 1e-4;
  double gamma = 0.9;
  std::size_t batch_size = 1024;
  std::size_t memory_capacity = 10000;
  std::uint64_t total_steps = 64000;
  std::uint64_t seed = 0;
  std::size_t warmup = 0;  // 0 means "batch_size"
  bool use_target_network = false;
  std::uint64_t target_sync_interval = 1000;
  std::uint64_t log_interval = 128;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;
  EpsilonSchedule epsilon;
  std::uint64_t final_greedy_steps = 128;

  std::size_t warmup_threshold() const { return warmup == 0 ? batch_size : warmup; }

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (batch_size > memory_capacity) throw std::invalid_argument("batch size exceeds replay capacity");
    if (warmup_threshold() < batch_size) throw std::invalid_argument("warmup must be at least the batch size");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (log_interval == 0) throw std::invalid_argument("log interval must be positive");
    if (epsilon.interval == 0) throw std::invalid_argument("epsilon interval must be positive");
    if (use_target_network && target_sync_interval == 0)
      throw std::invalid_argument("target sync interval must be positive");
  }

  AdamOptions adam() const { return AdamOptions{learning_rate, 0.9, 0.999, 1e-8}; }
};

namespace detail {
// Packs distinct states into matrix columns, in order of first appearance.
// Keys view the states' own storage, which must outlive the packing.
class StateColumns {
 public:
  void clear() {
    index_.clear();
    states_.clear();
  }

  std::size_t add(const StateVector& s) {
    std::string_view key(reinterpret_cast<const char*>(s.bits.data()), s.bits.size());
    auto [it, inserted] = index_.emplace(key, states_.size());
    if (inserted) states_.push_back(&s);
    return it->second;
  }

  std::size_t count() const { return states_.size(); }

  // Fills the first count() columns of `m`, growing it if needed.
  void fill(Eigen::MatrixXd& m, std::size_t rows) const {
    reserve_cols(m, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(states_.size()));
    for (std::size_t c = 0; c < states_.size(); ++c)
      for (std::size_t r = 0; r < rows; ++r)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = states_[c]->bits[r] ? 1.0 : 0.0;
  }

 private:
  std::unordered_map<std::string_view, std::size_t> index_;
  std::vector<const StateVector*> states_;
};
}  // namespace detail

// Reusable buffers for replay updates.
struct ReplayWorkspace {
  detail::StateColumns states, next_states;
  Eigen::MatrixXd inputs, next_inputs;
  ForwardCache next_cache;
  GradientWorkspace gradient;
  std::vector<const Experience*> batch;
  std::vector<std::size_t> column, next_column, action;
  std::vector<double> target;
};

// Bellman targets y = r + gamma * max_a' Q_eval(s')[a'] for ws.batch, written
// to ws.target. Identical next states share one forward pass.
inline void bellman_targets(const QNetwork& eval, double gamma, ReplayWorkspace& ws) {
  const auto rows = eval.shape().inputs();
  ws.next_states.clear();
  ws.next_column.clear();
  for (const auto* e : ws.batch) ws.next_column.push_back(ws.next_states.add(e->next_state));
  ws.next_states.fill(ws.next_inputs, rows);
  const auto n = static_cast<Eigen::Index>(ws.next_states.count());
  eval.forward_cached(ws.next_inputs.leftCols(n), ws.next_cache);
  ws.target.clear();
  for (std::size_t i = 0; i < ws.batch.size(); ++i) {
    const auto best = ws.next_cache.output.col(static_cast<Eigen::Index>(ws.next_column[i])).maxCoeff();
    ws.target.push_back(ws.batch[i]->reward + gamma * best);
  }
}

inline std::vector<double> bellman_targets(const QNetwork& eval, const std::vector<const Experience*>& batch,
                                           double gamma) {
  ReplayWorkspace ws;
  ws.batch = batch;
  bellman_targets(eval, gamma, ws);
  return ws.target;
}

// One experience-replay update. Below the warmup threshold nothing happens
// and the loss is 0.
template <class Rng>
double replay_update(QNetwork& net, AdamOptimizer& opt, const ReplayMemory& memory,
                     const TrainingConfig& config, Rng& rng, const QNetwork* target_net,
                     ReplayWorkspace& ws) {
  if (memory.size() < config.warmup_threshold()) return 0.0;
  const auto indices = memory.sample_indices(config.batch_size, rng);
  ws.batch.clear();
  for (auto i : indices) ws.batch.push_back(&memory[i]);

  bellman_targets(target_net ? *target_net : net, config.gamma, ws);
  ws.states.clear();
  ws.column.clear();
  ws.action.clear();
  for (const auto* e : ws.batch) {
    ws.column.push_back(ws.states.add(e->state));
    ws.action.push_back(e->action);
  }
  const auto rows = net.shape().inputs();
  ws.states.fill(ws.inputs, rows);
  loss_and_gradients(net, ws.inputs.leftCols(static_cast<Eigen::Index>(ws.states.count())), ws.column,
                     ws.action, ws.target, ws.gradient);
  optimizer_step(net, opt, ws.gradient.result.gradients);
  return ws.gradient.result.loss;
}

template <class Rng>
double replay_update(QNetwork& net, AdamOptimizer& opt, const ReplayMemory& memory,
                     const TrainingConfig& config, Rng& rng, const QNetwork* target_net = nullptr) {
  ReplayWorkspace ws;
  return replay_update(net, opt, memory, config, rng, target_net, ws);
}

struct WindowStats {
  std::uint64_t window_index = 0;
  double acc_reward = 0.0;
  double acc_loss = 0.0;
  std::size_t total_indexes = 0;
  std::size_t total_optimal_indexes = 0;
  double epsilon = 0.0;
};

struct TrainingLog {
  std::vector<WindowStats> windows;
  IndexConfiguration final_configuration;
  std::uint64_t steps = 0;
};

inline std::size_t optimal_count(const IndexConfiguration& config, const BitVector& optimal) {
  return popcount(bitwise_and(config.bits(), optimal));
}

// Ground truth for whichever segment the environment is about to serve.
inline BitVector active_optimal(const Environment& env) {
  const auto& seg = env.workload().segments[env.active_segment()];
  return beneficial_columns(seg.templates, env.columns());
}

struct RolloutRow {
  std::uint64_t step;
  std::size_t segment;
  bool shift;
  Action action;
  double reward;
  std::size_t total_indexes;
  std::size_t optimal_indexes;
  StateVector state;
  double simulated_seconds;
};

// Frozen-policy rollout: no learning, epsilon-greedy with the given epsilon
// (0 for a purely greedy policy). Optimal counts are measured against the
// segment whose queries were observed during the step.
inline std::vector<RolloutRow> rollout(const QNetwork& net, Environment& env, std::uint64_t steps,
                                       double epsilon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<RolloutRow> rows;
  rows.reserve(steps);
  auto state = env.state();
  for (std::uint64_t i = 0; i < steps; ++i) {
    const auto step = env.steps_taken();
    const auto segment = env.active_segment();
    const bool shift = is_shift(env.workload(), step * env.options().queries_per_step);
    const auto optimal = active_optimal(env);
    auto action = select_action(net, state, epsilon, rng);
    auto out = env.step(action);
    rows.push_back(RolloutRow{step, segment, shift, action, out.reward, env.configuration().count(),
                              optimal_count(env.configuration(), optimal), out.next_state,
                              out.info.simulated_seconds});
    state = std::move(out.next_state);
  }
  return rows;
}

// Training loop state. Kept as an object so a run can be checkpointed and
// resumed.
class Trainer {
 public:
  Trainer(Environment& env, TrainingConfig config)
      : env_(env), config_(std::move(config)), memory_(config_.memory_capacity) {
    config_.validate();
    const NetworkShape shape{env_.columns(), config_.hidden1, config_.hidden2};
    std::seed_seq seq{config_.seed, std::uint64_t{0x51}};
    std::mt19937_64 init_rng(seq);
    net_ = QNetwork::initialized(shape, init_rng);
    opt_ = AdamOptimizer(shape, config_.adam());
    std::seed_seq act_seq{config_.seed, std::uint64_t{0xac}};
    action_rng_.seed(act_seq);
    std::seed_seq rep_seq{config_.seed, std::uint64_t{0x4e}};
    replay_rng_.seed(rep_seq);
    env_.reset();
    state_ = env_.state();
    if (config_.use_target_network) target_ = net_;
  }

  // Runs up to `steps` more training steps (bounded by total_steps).
  void run(std::uint64_t steps) {
    const auto end = std::min(config_.total_steps, step_ + steps);
    while (step_ < end) {
      const double eps = epsilon_at(config_.epsilon, step_);
      const auto a = select_action_index(net_.forward(state_.bits), eps, action_rng_);
      auto out = env_.step(action_from_index(a, env_.columns()));
      memory_.store(Experience{state_, a, out.reward, out.next_state});
      const double loss = replay_update(net_, opt_, memory_, config_, replay_rng_,
                                        config_.use_target_network ? &*target_ : nullptr, workspace_);
      state_ = std::move(out.next_state);

      if (step_ % config_.log_interval == 0) {
        current_ = WindowStats{};
        current_.window_index = step_ / config_.log_interval;
        current_.epsilon = eps;
      }
      current_.acc_reward += out.reward;
      current_.acc_loss += loss;
      ++step_;
      if (step_ % config_.log_interval == 0 || step_ == config_.total_steps) {
        current_.total_indexes = env_.configuration().count();
        current_.total_optimal_indexes = optimal_count(env_.configuration(), active_optimal(env_));
        log_.windows.push_back(current_);
      }
      if (config_.use_target_network && step_ % config_.target_sync_interval == 0) target_ = net_;
    }
    log_.steps = step_;
  }

  TrainingLog finish() {
    run(config_.total_steps - step_);
    log_.final_configuration = final_greedy_configuration();
    return log_;
  }

  // Configuration reached by a purely greedy continuation of the final state,
  // run on a copy of the environment so training state is untouched.
  IndexConfiguration final_greedy_configuration() const {
    Environment probe(env_.columns(), env_.workload(), env_.options());
    probe.restore(env_.configuration(), env_.steps_taken());
    rollout(net_, probe, config_.final_greedy_steps, 0.0, config_.seed);
    return probe.configuration();
  }

  const QNetwork& network() const { return net_; }
  QNetwork& network() { return net_; }
  const AdamOptimizer& optimizer() const { return opt_; }
  const ReplayMemory& memory() const { return memory_; }
  const TrainingLog& log() const { return log_; }
  const TrainingConfig& config() const { return config_; }
  std::uint64_t step() const { return step_; }

  // Checkpoint text format:
  //   autoindex-checkpoint 1
  //   step <n>
  //   configuration <I bits>
  //   <network block, see save_network>
  //   adam <optimizer steps>
  //   <first moments> <second moments>   (same layout as the network weights)
  //   target 0|1 [<network block>]
  //   <action rng state>
  //   <replay rng state>
  // The replay memory is not saved; a resumed run refills it and waits for
  // the warmup threshold again.
  void save_checkpoint(std::ostream& out) const {
    out << "autoindex-checkpoint 1\n";
    out << "step " << step_ << '\n';
    out << "configuration " << to_string(env_.configuration().bits()) << '\n';
    save_network(out, net_);
    out << "adam " << opt_.steps() << '\n';
    detail::write_parameters(out, opt_.first_moment());
    detail::write_parameters(out, opt_.second_moment());
    out << "target " << (target_ ? 1 : 0) << '\n';
    if (target_) save_network(out, *target_);
    out << action_rng_ << '\n' << replay_rng_ << '\n';
  }

  void load_checkpoint(std::istream& in) {
    std::string word, bits;
    int version = 0;
    std::uint64_t step = 0, adam_steps = 0;
    if (!(in >> word >> version) || word != "autoindex-checkpoint" || version != 1)
      throw std::runtime_error("not an autoindex checkpoint");
    if (!(in >> word >> step) || word != "step") throw std::runtime_error("checkpoint: missing step");
    if (!(in >> word >> bits) || word != "configuration")
      throw std::runtime_error("checkpoint: missing configuration");
    auto net = load_network(in);
    if (!(net.shape() == net_.shape()))
      throw std::invalid_argument("checkpoint network shape does not match this environment/config");
    if (bits.size() != env_.columns()) throw std::invalid_argument("checkpoint column count mismatch");
    if (!(in >> word >> adam_steps) || word != "adam") throw std::runtime_error("checkpoint: missing adam");
    auto first = Parameters::zeros(net.shape()), second = Parameters::zeros(net.shape());
    detail::read_parameters(in, first);
    detail::read_parameters(in, second);
    int has_target = 0;
    if (!(in >> word >> has_target) || word != "target") throw std::runtime_error("checkpoint: missing target");
    std::optional<QNetwork> target;
    if (has_target) target = load_network(in);
    std::mt19937_64 action_rng, replay_rng;
    if (!(in >> action_rng >> replay_rng)) throw std::runtime_error("checkpoint: missing rng state");

    BitVector config_bits;
    for (char c : bits) config_bits.push_back(c == '1' ? 1 : 0);
    net_ = std::move(net);
    opt_.restore(adam_steps, std::move(first), std::move(second));
    target_ = config_.use_target_network ? (target ? target : std::optional<QNetwork>(net_)) : std::nullopt;
    action_rng_ = action_rng;
    replay_rng_ = replay_rng;
    step_ = step;
    env_.restore(IndexConfiguration(std::move(config_bits)), step);
    state_ = env_.state();
    memory_ = ReplayMemory(config_.memory_capacity);
    log_ = TrainingLog{};
    log_.steps = step_;
  }

 private:
  Environment& env_;
  TrainingConfig config_;
  QNetwork net_;
  std::optional<QNetwork> target_;
  AdamOptimizer opt_;
  ReplayMemory memory_;
  std::mt19937_64 action_rng_;
  std::mt19937_64 replay_rng_;
  StateVector state_;
  std::uint64_t step_ = 0;
  WindowStats current_;
  TrainingLog log_;
  ReplayWorkspace workspace_;
};

inline TrainingLog train(Environment& env, const TrainingConfig& config) {
  Trainer trainer(env, config);
  return trainer.finish();
}

inline void write_training_log_csv(std::ostream& out, const TrainingLog& log) {
  std::ostringstream s;
  s.precision(17);
  s << "window_index,acc_reward,acc_loss,total_indexes,total_optimal_indexes,epsilon\n";
  for (const auto& w : log.windows) {
    s << w.window_index << ',' << w.acc_reward << ',' << w.acc_loss << ',' << w.total_indexes << ','
      << w.total_optimal_indexes << ',' << w.epsilon << '\n';
  }
  out << s.str();
}

}  // namespace autoindex
