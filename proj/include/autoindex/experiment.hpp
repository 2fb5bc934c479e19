#pragma once

// Experiment drivers behind the command-line tool: train, evaluate, bench,
// transfer and gradient-check. Every driver writes CSV files plus a manifest
// with the resolved configuration into <out>/<run_name>/.
//
// CSV files start with two comment lines, "# autoindex <schema> v<version>"
// and "# seed=<seed>", followed by a header row. Column order is fixed per
// schema version.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoindex/agent.hpp"
#include "autoindex/benchmark.hpp"
#include "autoindex/catalog.hpp"
#include "autoindex/environment.hpp"
#include "autoindex/qfunction.hpp"
#include "autoindex/workload.hpp"

namespace autoindex {

struct ExperimentConfig {
  std::string run_name = "run";
  std::uint64_t seed = 0;
  std::string catalog = "builtin";        // "builtin" or a schema file path
  std::string workload = "tpch-fixed";    // "tpch-fixed", "tpch-shifting" or a file path
  std::uint64_t segment_length = kDefaultShiftSegmentLength;
  std::size_t horizon = 0;                // 0: one pass over the read templates
  std::size_t queries_per_step = 1;
  TrainingConfig training;
  CostModel cost;
  std::string out_dir = "out";
  bool overwrite = false;
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& t = c.training;
  return {
      {"run_name", c.run_name},
      {"seed", c.seed},
      {"catalog", c.catalog},
      {"workload", c.workload},
      {"segment_length", c.segment_length},
      {"horizon", c.horizon},
      {"queries_per_step", c.queries_per_step},
      {"steps", t.total_steps},
      {"learning_rate", t.learning_rate},
      {"gamma", t.gamma},
      {"batch_size", t.batch_size},
      {"memory_capacity", t.memory_capacity},
      {"warmup", t.warmup},
      {"target_network", t.use_target_network},
      {"target_sync_interval", t.target_sync_interval},
      {"log_interval", t.log_interval},
      {"hidden1", t.hidden1},
      {"hidden2", t.hidden2},
      {"epsilon_initial", t.epsilon.initial},
      {"epsilon_final", t.epsilon.final},
      {"epsilon_decay", t.epsilon.decay},
      {"epsilon_interval", t.epsilon.interval},
      {"scale_factor", c.cost.scale_factor},
      {"index_speedup", c.cost.index_speedup},
      {"useful_cap", c.cost.useful_cap},
      {"write_penalty", c.cost.write_penalty},
      {"jitter", c.cost.jitter},
      {"index_unit_size", c.cost.index_unit_size},
      {"out", c.out_dir},
  };
}

// Unknown keys are rejected so that typos do not silently fall back to
// defaults.
inline void apply_json(ExperimentConfig& c, const nlohmann::json& doc) {
  auto& t = c.training;
  for (const auto& [key, v] : doc.items()) {
    if (key == "run_name") c.run_name = v.get<std::string>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "catalog") c.catalog = v.get<std::string>();
    else if (key == "workload") c.workload = v.get<std::string>();
    else if (key == "segment_length") c.segment_length = v.get<std::uint64_t>();
    else if (key == "horizon") c.horizon = v.get<std::size_t>();
    else if (key == "queries_per_step") c.queries_per_step = v.get<std::size_t>();
    else if (key == "steps") t.total_steps = v.get<std::uint64_t>();
    else if (key == "learning_rate") t.learning_rate = v.get<double>();
    else if (key == "gamma") t.gamma = v.get<double>();
    else if (key == "batch_size") t.batch_size = v.get<std::size_t>();
    else if (key == "memory_capacity") t.memory_capacity = v.get<std::size_t>();
    else if (key == "warmup") t.warmup = v.get<std::size_t>();
    else if (key == "target_network") t.use_target_network = v.get<bool>();
    else if (key == "target_sync_interval") t.target_sync_interval = v.get<std::uint64_t>();
    else if (key == "log_interval") t.log_interval = v.get<std::uint64_t>();
    else if (key == "hidden1") t.hidden1 = v.get<std::size_t>();
    else if (key == "hidden2") t.hidden2 = v.get<std::size_t>();
    else if (key == "epsilon_initial") t.epsilon.initial = v.get<double>();
    else if (key == "epsilon_final") t.epsilon.final = v.get<double>();
    else if (key == "epsilon_decay") t.epsilon.decay = v.get<double>();
    else if (key == "epsilon_interval") t.epsilon.interval = v.get<std::uint64_t>();
    else if (key == "scale_factor") c.cost.scale_factor = v.get<double>();
    else if (key == "index_speedup") c.cost.index_speedup = v.get<double>();
    else if (key == "useful_cap") c.cost.useful_cap = v.get<std::size_t>();
    else if (key == "write_penalty") c.cost.write_penalty = v.get<double>();
    else if (key == "jitter") c.cost.jitter = v.get<double>();
    else if (key == "index_unit_size") c.cost.index_unit_size = v.get<double>();
    else if (key == "out") c.out_dir = v.get<std::string>();
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  ExperimentConfig c;
  try {
    apply_json(c, nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed config file " + path + ": " + e.what());
  }
  return c;
}

// Catalog, workload and environment options resolved from a config.
struct ResolvedSetup {
  SchemaCatalog catalog;
  WorkloadSpec workload;
  EnvironmentOptions env;
};

inline ResolvedSetup resolve(const ExperimentConfig& c) {
  ResolvedSetup r;
  r.catalog = c.catalog == "builtin" ? builtin_tpch_catalog() : load_catalog(c.catalog);
  if (c.workload == "tpch-fixed") r.workload = tpch_fixed_workload(r.catalog);
  else if (c.workload == "tpch-shifting") r.workload = tpch_shifting_workload(r.catalog, c.segment_length);
  else r.workload = load_workload(c.workload, r.catalog);
  r.workload.seed = c.seed;
  r.env.horizon = c.horizon ? c.horizon : std::max<std::size_t>(1, read_templates(r.workload).size());
  r.env.queries_per_step = c.queries_per_step;
  r.env.cost_model = c.cost;
  r.env.cost_model.seed = c.seed;
  r.env.cost_model.validate();
  return r;
}

inline TrainingConfig resolved_training(const ExperimentConfig& c) {
  auto t = c.training;
  t.seed = c.seed;
  return t;
}

namespace detail {
inline std::filesystem::path prepare_run_dir(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  if (c.run_name.empty() || c.run_name.find('/') != std::string::npos)
    throw std::invalid_argument("run name must be a non-empty single path component");
  fs::path dir = fs::path(c.out_dir) / c.run_name;
  if (fs::exists(dir / "manifest.json") && !c.overwrite)
    throw std::runtime_error("run '" + c.run_name + "' already exists in " + c.out_dir +
                             " (choose another run name or pass --overwrite)");
  fs::create_directories(dir);
  return dir;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

inline void csv_preamble(std::ostream& out, const std::string& schema, int version, std::uint64_t seed) {
  out << "# autoindex " << schema << " v" << version << "\n# seed=" << seed << '\n';
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const ExperimentConfig& c, const std::vector<std::string>& artifacts,
                           nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json doc{{"command", command}, {"config", to_json(c)}, {"artifacts", artifacts}};
  for (auto& [k, v] : extra.items()) doc[k] = v;
  auto out = open_out(dir / "manifest.json");
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing manifest in " + dir.string());
}

inline void check_written(std::ofstream& out, const std::filesystem::path& p) {
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + p.string());
}
}  // namespace detail

struct TrainResult {
  TrainingLog log;
  QNetwork network;
  std::filesystem::path dir;
};

// Artifacts: training_log.csv, checkpoint.txt, final_config.txt,
// command_log.csv, manifest.json.
inline TrainResult cmd_train(const ExperimentConfig& c) {
  auto setup = resolve(c);
  auto training = resolved_training(c);
  training.validate();
  auto dir = detail::prepare_run_dir(c);

  Environment env(setup.catalog.indexable_count(), setup.workload, setup.env);
  Trainer trainer(env, training);
  TrainResult result{trainer.finish(), trainer.network(), dir};

  {
    auto p = dir / "training_log.csv";
    auto out = detail::open_out(p);
    detail::csv_preamble(out, "training-log", 1, c.seed);
    write_training_log_csv(out, result.log);
    detail::check_written(out, p);
  }
  {
    auto p = dir / "checkpoint.txt";
    auto out = detail::open_out(p);
    trainer.save_checkpoint(out);
    detail::check_written(out, p);
  }
  {
    auto p = dir / "final_config.txt";
    auto out = detail::open_out(p);
    out << "# final greedy configuration, seed=" << c.seed << '\n';
    write_configuration(out, setup.catalog, result.log.final_configuration);
    detail::check_written(out, p);
  }
  {
    auto p = dir / "command_log.csv";
    auto out = detail::open_out(p);
    detail::csv_preamble(out, "command-log", 1, c.seed);
    const auto* sim = dynamic_cast<const SimulatedBackend*>(&env.backend());
    write_command_log_csv(out, setup.catalog, sim ? sim->log() : std::vector<BackendCommand>{});
    detail::check_written(out, p);
  }
  detail::write_manifest(dir, "train", c,
                         {"training_log.csv", "checkpoint.txt", "final_config.txt", "command_log.csv"},
                         {{"final_indexes", result.log.final_configuration.count()}});
  return result;
}

// Loads the network part of a training checkpoint (or a bare network file)
// and checks it against the catalog's column count.
inline QNetwork load_policy(const std::string& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::string first;
  std::getline(in, first);
  if (first.rfind("autoindex-checkpoint", 0) == 0) {
    std::string line;
    while (std::getline(in, line) && line.rfind("configuration", 0) != 0) {
    }
  } else {
    in.seekg(0);
  }
  auto net = load_network(in);
  if (net.shape().columns != columns)
    throw std::invalid_argument("checkpoint was trained for " + std::to_string(net.shape().columns) +
                                " columns but the catalog has " + std::to_string(columns));
  return net;
}

// Index configuration recorded in a training checkpoint. Bare network files
// carry none.
inline std::optional<IndexConfiguration> load_policy_configuration(const std::string& path,
                                                                   std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + std::string(path));
  std::string word, bits;
  in >> word;
  if (word != "autoindex-checkpoint") return std::nullopt;
  while (in >> word && word != "configuration") {
  }
  if (!(in >> bits)) throw std::runtime_error("checkpoint: missing configuration");
  if (bits.size() != columns) throw std::invalid_argument("checkpoint configuration has the wrong column count");
  BitVector v(columns);
  for (std::size_t i = 0; i < columns; ++i) {
    if (bits[i] != '0' && bits[i] != '1') throw std::runtime_error("checkpoint: bad configuration bits");
    v[i] = bits[i] == '1';
  }
  return IndexConfiguration(std::move(v));
}

struct EvaluateOptions {
  std::uint64_t steps = 2000;
  std::optional<double> epsilon;  // defaults to the schedule floor
  bool from_empty = false;        // otherwise resume the checkpoint's configuration
};

inline void write_rollout_csv(std::ostream& out, const std::vector<RolloutRow>& rows,
                              const SchemaCatalog& catalog) {
  std::ostringstream s;
  s.precision(17);
  s << "step,segment,shift,action,reward,total_indexes,total_optimal_indexes\n";
  for (const auto& r : rows) {
    s << r.step << ',' << r.segment << ',' << (r.shift ? 1 : 0) << ',' << describe(r.action, &catalog) << ','
      << r.reward << ',' << r.total_indexes << ',' << r.optimal_indexes << '\n';
  }
  out << s.str();
}

inline std::vector<RolloutRow> evaluate_policy(const QNetwork& net, const ResolvedSetup& setup,
                                               std::uint64_t steps, double epsilon, std::uint64_t seed,
                                               const std::optional<IndexConfiguration>& start = std::nullopt) {
  if (net.shape().columns != setup.catalog.indexable_count())
    throw std::invalid_argument("policy column count does not match the catalog");
  Environment env(setup.catalog.indexable_count(), setup.workload, setup.env);
  if (start) env.reset(*start);
  else env.reset();
  return rollout(net, env, steps, epsilon, seed);
}

// Artifacts: evaluation.csv (shift column marks the first step of each new
// segment), manifest.json.
inline std::vector<RolloutRow> cmd_evaluate(const ExperimentConfig& c, const std::string& checkpoint,
                                            const EvaluateOptions& options) {
  auto setup = resolve(c);
  auto net = load_policy(checkpoint, setup.catalog.indexable_count());
  const double eps = options.epsilon.value_or(c.training.epsilon.final);
  std::optional<IndexConfiguration> start;
  if (!options.from_empty) start = load_policy_configuration(checkpoint, setup.catalog.indexable_count());
  auto dir = detail::prepare_run_dir(c);
  auto rows = evaluate_policy(net, setup, options.steps, eps, c.seed, start);
  auto p = dir / "evaluation.csv";
  auto out = detail::open_out(p);
  detail::csv_preamble(out, "evaluation", 1, c.seed);
  write_rollout_csv(out, rows, setup.catalog);
  detail::check_written(out, p);
  detail::write_manifest(dir, "evaluate", c, {"evaluation.csv"},
                         {{"checkpoint", checkpoint}, {"steps", options.steps}, {"epsilon", eps},
                          {"initial_indexes", start ? start->count() : 0},
                          {"mode", setup.workload.segments.size() > 1 ? "shifting" : "fixed"}});
  return rows;
}

struct BenchOptions {
  std::vector<std::string> configs{"default", "all_indexed", "ground_truth"};
  std::string trained_config;  // final_config.txt from a training run
  std::string timings;         // optional timing sheet CSV to score as well
  BenchmarkOptions benchmark;
};

struct BenchRow {
  std::string name;
  BenchmarkResult result;
};

// Artifacts: bench.csv (plus timings.csv when a timing sheet is scored),
// manifest.json.
inline std::vector<BenchRow> cmd_bench(const ExperimentConfig& c, const BenchOptions& options) {
  auto setup = resolve(c);
  std::vector<NamedConfiguration> named;
  auto baselines = baseline_configs(setup.catalog, c.seed);
  for (const auto& name : options.configs) {
    if (name == "trained") {
      if (options.trained_config.empty())
        throw std::invalid_argument("config 'trained' needs --trained <final_config.txt>");
      std::ifstream in(options.trained_config);
      if (!in) throw std::runtime_error("cannot open " + options.trained_config);
      named.push_back({"trained", read_configuration(in, setup.catalog)});
      continue;
    }
    auto it = std::find_if(baselines.begin(), baselines.end(), [&](const auto& b) { return b.name == name; });
    if (it == baselines.end()) throw std::invalid_argument("unknown configuration name '" + name + "'");
    named.push_back(*it);
  }

  std::optional<TimingSheet> sheet;
  if (!options.timings.empty()) {
    std::ifstream in(options.timings);
    if (!in) throw std::runtime_error("cannot open timing sheet " + options.timings);
    sheet = read_timing_sheet(in);
  }

  auto dir = detail::prepare_run_dir(c);
  std::vector<BenchRow> rows;
  for (const auto& n : named) rows.push_back({n.name, run_benchmark(n.config, setup.workload, setup.env.cost_model,
                                                                    options.benchmark)});
  auto p = dir / "bench.csv";
  auto out = detail::open_out(p);
  detail::csv_preamble(out, "bench", 1, c.seed);
  write_benchmark_header(out, options.benchmark.repetitions);
  for (const auto& r : rows) write_benchmark_row(out, r.name, r.result);
  detail::check_written(out, p);

  std::vector<std::string> artifacts{"bench.csv"};
  if (sheet) {
    auto tp = dir / "timings.csv";
    auto tout = detail::open_out(tp);
    detail::csv_preamble(tout, "timing-score", 1, c.seed);
    std::ostringstream s;
    s.precision(17);
    s << "source,power,throughput,qphh\n"
      << options.timings << ',' << power_at_size(*sheet) << ',' << throughput_at_size(*sheet) << ','
      << qphh(*sheet) << '\n';
    tout << s.str();
    detail::check_written(tout, tp);
    artifacts.push_back("timings.csv");
  }
  detail::write_manifest(dir, "bench", c, artifacts);
  return rows;
}

struct TransferBlock {
  double scale_factor;
  std::vector<RolloutRow> rows;
  BenchmarkResult benchmark;
  // The first block's timing sheets rescored at this block's SF. Simulated
  // times grow with SF, so `benchmark.qphh` stays roughly flat; this column
  // isolates the metric's own linear SF term.
  double qphh_fixed_times = 0.0;
};

// Trimmed mean of qphh over `sheets` with their scale factor replaced by `sf`.
inline double rescored_qphh(std::vector<TimingSheet> sheets, double sf) {
  std::vector<double> values;
  for (auto& s : sheets) {
    s.scale_factor = sf;
    values.push_back(qphh(s));
  }
  return trimmed_mean(values);
}

struct TransferOptions {
  std::vector<double> scale_factors{1.0, 10.0, 100.0};
  std::uint64_t steps = 2000;
  std::optional<double> epsilon;
  bool from_empty = false;
  BenchmarkOptions benchmark;
};

// Rolls the same policy out under each scale factor with the same seed and
// benchmarks the configuration each rollout ends in. Throws if the action
// traces differ between scale factors.
//
// Artifacts: transfer.csv (per-step series, one block per SF),
// transfer_metrics.csv (one row per SF), manifest.json.
inline std::vector<TransferBlock> cmd_transfer(const ExperimentConfig& c, const std::string& checkpoint,
                                               const TransferOptions& options) {
  if (options.scale_factors.empty()) throw std::invalid_argument("transfer needs at least one scale factor");
  auto base = resolve(c);
  auto net = load_policy(checkpoint, base.catalog.indexable_count());
  const double eps = options.epsilon.value_or(c.training.epsilon.final);
  std::optional<IndexConfiguration> start;
  if (!options.from_empty) start = load_policy_configuration(checkpoint, base.catalog.indexable_count());
  auto dir = detail::prepare_run_dir(c);

  std::vector<TransferBlock> blocks;
  for (double sf : options.scale_factors) {
    auto setup = base;
    setup.env.cost_model.scale_factor = sf;
    setup.env.cost_model.validate();
    Environment env(setup.catalog.indexable_count(), setup.workload, setup.env);
    if (start) env.reset(*start);
    else env.reset();
    TransferBlock block{sf, rollout(net, env, options.steps, eps, c.seed), {}};
    block.benchmark = run_benchmark(env.configuration(), setup.workload, setup.env.cost_model, options.benchmark);
    blocks.push_back(std::move(block));
  }
  for (auto& b : blocks) b.qphh_fixed_times = rescored_qphh(blocks.front().benchmark.sheets, b.scale_factor);
  for (std::size_t b = 1; b < blocks.size(); ++b) {
    const auto& first = blocks.front().rows;
    const auto& rows = blocks[b].rows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!(rows[i].action == first[i].action) || rows[i].reward != first[i].reward ||
          !(rows[i].state == first[i].state))
        throw std::runtime_error("action trace at SF " + std::to_string(blocks[b].scale_factor) +
                                 " diverges from SF " + std::to_string(blocks.front().scale_factor) +
                                 " at step " + std::to_string(i));
    }
  }

  {
    auto p = dir / "transfer.csv";
    auto out = detail::open_out(p);
    detail::csv_preamble(out, "transfer", 1, c.seed);
    std::ostringstream s;
    s.precision(17);
    s << "scale_factor,step,action,reward,total_indexes,total_optimal_indexes,simulated_seconds\n";
    for (const auto& b : blocks)
      for (const auto& r : b.rows)
        s << b.scale_factor << ',' << r.step << ',' << describe(r.action, &base.catalog) << ',' << r.reward << ','
          << r.total_indexes << ',' << r.optimal_indexes << ',' << r.simulated_seconds << '\n';
    out << s.str();
    detail::check_written(out, p);
  }
  {
    auto p = dir / "transfer_metrics.csv";
    auto out = detail::open_out(p);
    detail::csv_preamble(out, "transfer-metrics", 1, c.seed);
    std::ostringstream s;
    s.precision(17);
    s << "scale_factor,power,throughput,qphh,qphh_fixed_times,index_size,final_indexes\n";
    for (const auto& b : blocks)
      s << b.scale_factor << ',' << b.benchmark.power << ',' << b.benchmark.throughput << ',' << b.benchmark.qphh
        << ',' << b.qphh_fixed_times << ',' << b.benchmark.index_size << ','
        << (b.rows.empty() ? 0 : b.rows.back().total_indexes) << '\n';
    out << s.str();
    detail::check_written(out, p);
  }
  detail::write_manifest(dir, "transfer", c, {"transfer.csv", "transfer_metrics.csv"},
                         {{"checkpoint", checkpoint}, {"scale_factors", options.scale_factors},
                          {"steps", options.steps}, {"epsilon", eps}});
  return blocks;
}

struct GradientCheckCommandOptions {
  std::size_t columns = 4;
  std::size_t hidden = 6;
  std::size_t batch = 8;
  std::size_t networks = 10;
  GradientCheckOptions check;
};

// A random binary batch with random targets for gradient checking.
template <class Rng>
TrainingBatch random_batch(const NetworkShape& shape, std::size_t samples, Rng& rng) {
  std::bernoulli_distribution bit(0.5);
  std::uniform_int_distribution<std::size_t> action(0, shape.outputs() - 1);
  std::uniform_real_distribution<double> target(-5.0, 5.0);
  TrainingBatch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(shape.inputs()), static_cast<Eigen::Index>(samples));
  for (Eigen::Index i = 0; i < batch.inputs.size(); ++i) batch.inputs.data()[i] = bit(rng) ? 1.0 : 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    batch.column.push_back(i);
    batch.action.push_back(action(rng));
    batch.target.push_back(target(rng));
  }
  return batch;
}

// Random small networks and batches; kink-adjacent draws are redrawn.
inline std::vector<GradientCheckReport> run_gradient_checks(const GradientCheckCommandOptions& o,
                                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  const NetworkShape shape{o.columns, o.hidden, o.hidden};
  std::vector<GradientCheckReport> reports;
  std::size_t attempts = 0;
  while (reports.size() < o.networks) {
    if (++attempts > 100 * o.networks) throw std::runtime_error("could not draw kink-free gradient-check points");
    auto net = QNetwork::initialized(shape, rng);
    for (auto& b : net.params().biases)
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = bias(rng);
    auto batch = random_batch(shape, o.batch, rng);
    auto report = gradient_check(net, batch, o.check);
    if (report.kink_adjacent) continue;
    reports.push_back(report);
  }
  return reports;
}

// Artifacts: gradient_check.csv, manifest.json. Returns true iff every
// network passes.
inline bool cmd_gradient_check(const ExperimentConfig& c, const GradientCheckCommandOptions& o) {
  auto dir = detail::prepare_run_dir(c);
  auto reports = run_gradient_checks(o, c.seed);
  bool all = true;
  auto p = dir / "gradient_check.csv";
  auto out = detail::open_out(p);
  detail::csv_preamble(out, "gradient-check", 1, c.seed);
  std::ostringstream s;
  s.precision(17);
  s << "network,checked,excluded,max_relative_error,passed\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    all = all && r.passed;
    s << i << ',' << r.checked << ',' << r.excluded << ',' << r.max_relative_error << ',' << (r.passed ? 1 : 0) << '\n';
  }
  out << s.str();
  detail::check_written(out, p);
  detail::write_manifest(dir, "gradient-check", c, {"gradient_check.csv"},
                         {{"tolerance", o.check.tolerance}, {"perturbation", o.check.perturbation}, {"passed", all}});
  return all;
}

}  // namespace autoindex
