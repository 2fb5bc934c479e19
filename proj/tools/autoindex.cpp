// Command-line driver: train, evaluate, bench, transfer, gradient-check.
//
// Settings come from (highest first): command-line flags, AUTOINDEX_*
// environment variables, the --config JSON file, built-in defaults.
//
//   autoindex train --seed 1 --out runs --name s1
//   autoindex evaluate --checkpoint runs/s1/checkpoint.txt --workload tpch-shifting --name s1-eval
//   autoindex bench --configs default,all_indexed,ground_truth,trained --trained runs/s1/final_config.txt
//   autoindex transfer --checkpoint runs/s1/checkpoint.txt --sf 1,10,100
//   autoindex gradient-check --networks 10

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autoindex/experiment.hpp"

namespace {

using namespace autoindex;

template <class T>
CLI::Option* flag_opt(CLI::App& app, const std::string& name, std::optional<T>& dest, const std::string& env,
                      const std::string& help) {
  return app.add_option(name, dest, help)->envname("AUTOINDEX_" + env);
}

struct GlobalFlags {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, name, catalog, workload;
  std::optional<std::uint64_t> steps, segment_length;
  std::optional<std::size_t> horizon;
  std::optional<double> scale_factor, learning_rate, gamma, jitter;
  std::optional<std::size_t> batch_size, memory_capacity;
  bool target_network = false;
  bool overwrite = false;
};

void add_global(CLI::App& app, GlobalFlags& g) {
  app.add_option("--config", g.config_file, "JSON config file")->envname("AUTOINDEX_CONFIG");
  flag_opt(app, "--seed", g.seed, "SEED", "master seed");
  flag_opt(app, "--out", g.out, "OUT", "output directory");
  flag_opt(app, "--name", g.name, "NAME", "run name (subdirectory of --out)");
  flag_opt(app, "--catalog", g.catalog, "CATALOG", "builtin or schema JSON path");
  flag_opt(app, "--workload", g.workload, "WORKLOAD", "tpch-fixed, tpch-shifting or workload JSON path");
  flag_opt(app, "--segment-length", g.segment_length, "SEGMENT_LENGTH", "queries per shifting segment");
  flag_opt(app, "--horizon", g.horizon, "HORIZON", "usage window length in queries");
  flag_opt(app, "--steps", g.steps, "STEPS", "training steps (train) or rollout steps");
  flag_opt(app, "--sf-model", g.scale_factor, "SCALE_FACTOR", "cost-model scale factor");
  flag_opt(app, "--learning-rate", g.learning_rate, "LEARNING_RATE", "Adam step size");
  flag_opt(app, "--gamma", g.gamma, "GAMMA", "discount factor");
  flag_opt(app, "--batch-size", g.batch_size, "BATCH_SIZE", "replay minibatch size");
  flag_opt(app, "--memory", g.memory_capacity, "MEMORY", "replay memory capacity");
  flag_opt(app, "--jitter", g.jitter, "JITTER", "timing noise amplitude");
  app.add_flag("--target-network", g.target_network, "use a periodically synced target network")
      ->envname("AUTOINDEX_TARGET_NETWORK");
  app.add_flag("--overwrite", g.overwrite, "replace an existing run with the same name");
}

ExperimentConfig build_config(const GlobalFlags& g, bool steps_are_training) {
  ExperimentConfig c = g.config_file.empty() ? ExperimentConfig{} : load_experiment_config(g.config_file);
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.out_dir = *g.out;
  if (g.name) c.run_name = *g.name;
  if (g.catalog) c.catalog = *g.catalog;
  if (g.workload) c.workload = *g.workload;
  if (g.segment_length) c.segment_length = *g.segment_length;
  if (g.horizon) c.horizon = *g.horizon;
  if (g.steps && steps_are_training) c.training.total_steps = *g.steps;
  if (g.scale_factor) c.cost.scale_factor = *g.scale_factor;
  if (g.learning_rate) c.training.learning_rate = *g.learning_rate;
  if (g.gamma) c.training.gamma = *g.gamma;
  if (g.batch_size) c.training.batch_size = *g.batch_size;
  if (g.memory_capacity) c.training.memory_capacity = *g.memory_capacity;
  if (g.jitter) c.cost.jitter = *g.jitter;
  if (g.target_network) c.training.use_target_network = true;
  c.overwrite = g.overwrite;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement-learning index selection experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  add_global(app, g);

  auto* train = app.add_subcommand("train", "train an agent and write its log, checkpoint and final configuration");

  auto* evaluate = app.add_subcommand("evaluate", "roll out a trained policy and log index counts per step");
  std::string eval_checkpoint;
  std::optional<double> eval_epsilon;
  evaluate->add_option("--checkpoint", eval_checkpoint, "checkpoint or network file")->required();
  evaluate->add_option("--epsilon", eval_epsilon, "exploration rate (default: schedule floor)");
  bool eval_from_empty = false;
  evaluate->add_flag("--from-empty", eval_from_empty, "start from no indexes instead of the checkpoint's configuration");

  auto* bench = app.add_subcommand("bench", "score named index configurations with the benchmark metrics");
  BenchOptions bench_opts;
  bench->add_option("--configs", bench_opts.configs, "default, all_indexed, random, ground_truth, trained")
      ->delimiter(',');
  bench->add_option("--trained", bench_opts.trained_config, "final_config.txt from a training run");
  bench->add_option("--timings", bench_opts.timings, "timing sheet CSV to score");
  bench->add_option("--repetitions", bench_opts.benchmark.repetitions, "benchmark repetitions");
  bench->add_option("--streams", bench_opts.benchmark.streams, "throughput streams");

  auto* transfer = app.add_subcommand("transfer", "replay a policy under several scale factors");
  std::string transfer_checkpoint;
  TransferOptions transfer_opts;
  transfer->add_option("--checkpoint", transfer_checkpoint, "checkpoint or network file")->required();
  transfer->add_option("--sf", transfer_opts.scale_factors, "scale factors")->delimiter(',');
  transfer->add_option("--epsilon", transfer_opts.epsilon, "exploration rate (default: schedule floor)");
  transfer->add_flag("--from-empty", transfer_opts.from_empty, "start from no indexes instead of the checkpoint's configuration");

  auto* gradcheck = app.add_subcommand("gradient-check", "compare analytic and finite-difference gradients");
  GradientCheckCommandOptions gc;
  gradcheck->add_option("--networks", gc.networks, "random networks to check");
  gradcheck->add_option("--columns", gc.columns, "indexable columns of the test network");
  gradcheck->add_option("--hidden", gc.hidden, "hidden layer width");
  gradcheck->add_option("--batch", gc.batch, "samples per batch");
  gradcheck->add_option("--tolerance", gc.check.tolerance, "maximum relative error");
  gradcheck->add_option("--perturbation", gc.check.perturbation, "central-difference step");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      auto c = build_config(g, true);
      auto r = cmd_train(c);
      std::cout << "wrote " << r.dir.string() << " (" << r.log.windows.size() << " windows, final indexes "
                << r.log.final_configuration.count() << ")\n";
    } else if (*evaluate) {
      auto c = build_config(g, false);
      EvaluateOptions o;
      if (g.steps) o.steps = *g.steps;
      o.epsilon = eval_epsilon;
      o.from_empty = eval_from_empty;
      auto rows = cmd_evaluate(c, eval_checkpoint, o);
      std::cout << "wrote " << rows.size() << " evaluation rows to " << c.out_dir << '/' << c.run_name << '\n';
    } else if (*bench) {
      auto c = build_config(g, false);
      auto rows = cmd_bench(c, bench_opts);
      for (const auto& r : rows)
        std::cout << r.name << " qphh=" << r.result.qphh << " index_size=" << r.result.index_size << '\n';
    } else if (*transfer) {
      auto c = build_config(g, false);
      if (g.steps) transfer_opts.steps = *g.steps;
      auto blocks = cmd_transfer(c, transfer_checkpoint, transfer_opts);
      for (const auto& b : blocks)
        std::cout << "SF " << b.scale_factor << " qphh=" << b.benchmark.qphh
                  << " qphh_fixed_times=" << b.qphh_fixed_times << '\n';
    } else if (*gradcheck) {
      auto c = build_config(g, false);
      const bool ok = cmd_gradient_check(c, gc);
      std::cout << (ok ? "gradient check passed\n" : "gradient check FAILED\n");
      return ok ? 0 : 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
