#pragma once

// Simulated query timings and the TPC-H composite metrics.
//
//   Power@Size      = 3600 / (prod QI(i,0) * prod RI(j,0))^(1/24) * SF
//   Throughput@Size = (S * 22 / T_S) * 3600 * SF
//   QphH@Size       = sqrt(Power@Size * Throughput@Size)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "autoindex/catalog.hpp"
#include "autoindex/workload.hpp"

namespace autoindex {

constexpr double kSecondsPerHour = 3600.0;
constexpr std::size_t kPowerQueries = 22;
constexpr std::size_t kPowerRefreshes = 2;

struct CostModel {
  double scale_factor = 1.0;
  double index_speedup = 3.0;   // read time divisor per useful index
  std::size_t useful_cap = 2;   // useful indexes beyond this give nothing more
  double write_penalty = 0.1;   // refresh multiplier 1 + w * total indexes
  double jitter = 0.02;         // multiplicative noise amplitude
  double index_unit_size = 1.0; // storage units per index per SF
  std::uint64_t seed = 0;

  void validate() const {
    if (!(scale_factor >= 1.0)) throw std::invalid_argument("scale factor must be >= 1");
    if (!(index_speedup > 1.0)) throw std::invalid_argument("index speedup must be > 1");
    if (!(write_penalty >= 0.0)) throw std::invalid_argument("write penalty must be >= 0");
    if (!(jitter >= 0.0 && jitter < 1.0)) throw std::invalid_argument("jitter must be in [0, 1)");
    if (!(index_unit_size >= 0.0)) throw std::invalid_argument("index unit size must be >= 0");
  }
};

// Deterministic part of the simulated time, before jitter.
inline double expected_time(const QueryTemplate& query, const IndexConfiguration& config,
                            const CostModel& model) {
  if (query.kind == QueryKind::Refresh) {
    return query.base_cost * model.scale_factor *
           (1.0 + model.write_penalty * static_cast<double>(config.count()));
  }
  auto useful = std::min(used_indexes(query, config).size(), model.useful_cap);
  return query.base_cost * model.scale_factor /
         std::pow(model.index_speedup, static_cast<double>(useful));
}

template <class Rng>
double simulate_time(const QueryTemplate& query, const IndexConfiguration& config,
                     const CostModel& model, Rng& rng) {
  double t = expected_time(query, config, model);
  if (model.jitter > 0.0) {
    std::uniform_real_distribution<double> noise(1.0 - model.jitter, 1.0 + model.jitter);
    t *= noise(rng);
  }
  return t;
}

struct TimingSheet {
  std::vector<double> query_seconds;    // QI(i, 0), i = 1..22
  std::vector<double> refresh_seconds;  // RI(j, 0), j = 1..2
  std::size_t streams = 1;              // S
  double throughput_seconds = 0.0;      // T_S
  double scale_factor = 1.0;
};

inline double power_at_size(const std::vector<double>& query_seconds,
                            const std::vector<double>& refresh_seconds, double scale_factor) {
  if (query_seconds.size() != kPowerQueries || refresh_seconds.size() != kPowerRefreshes)
    throw std::invalid_argument("power test needs 22 query and 2 refresh timings");
  // Geometric mean through logs: the raw product of 24 timings overflows
  // easily.
  double log_sum = 0.0;
  for (const auto* times : {&query_seconds, &refresh_seconds}) {
    for (double t : *times) {
      if (!(t > 0.0) || !std::isfinite(t))
        throw std::invalid_argument("power test timings must be positive and finite");
      log_sum += std::log(t);
    }
  }
  return kSecondsPerHour / std::exp(log_sum / 24.0) * scale_factor;
}

inline double power_at_size(const TimingSheet& sheet) {
  return power_at_size(sheet.query_seconds, sheet.refresh_seconds, sheet.scale_factor);
}

inline double throughput_at_size(std::size_t streams, double total_seconds, double scale_factor) {
  if (streams < 1) throw std::invalid_argument("throughput test needs at least one stream");
  if (!(total_seconds > 0.0)) throw std::invalid_argument("throughput elapsed time must be positive");
  return static_cast<double>(streams) * static_cast<double>(kPowerQueries) / total_seconds *
         kSecondsPerHour * scale_factor;
}

inline double throughput_at_size(const TimingSheet& sheet) {
  return throughput_at_size(sheet.streams, sheet.throughput_seconds, sheet.scale_factor);
}

inline double qphh(double power, double throughput) {
  if (!(power > 0.0) || !(throughput > 0.0))
    throw std::invalid_argument("qphh inputs must be positive");
  return std::sqrt(power * throughput);
}

inline double qphh(const TimingSheet& sheet) {
  return qphh(power_at_size(sheet), throughput_at_size(sheet));
}

// Mean after discarding the single highest and lowest values. With fewer than
// three values there is nothing to trim.
inline double trimmed_mean(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("trimmed mean of empty set");
  std::sort(values.begin(), values.end());
  auto first = values.begin(), last = values.end();
  if (values.size() >= 3) {
    ++first;
    --last;
  }
  return std::accumulate(first, last, 0.0) / static_cast<double>(last - first);
}

struct BenchmarkOptions {
  std::size_t repetitions = 12;
  std::size_t streams = 2;
};

struct BenchmarkResult {
  double power = 0.0;
  double throughput = 0.0;
  double qphh = 0.0;
  double index_size = 0.0;
  std::vector<double> repetition_qphh;
  std::vector<TimingSheet> sheets;
};

inline double index_size(const IndexConfiguration& config, const CostModel& model) {
  return model.index_unit_size * static_cast<double>(config.count()) * model.scale_factor;
}

// One power test plus one throughput test. Each throughput stream runs all
// 22 queries and one refresh pair; T_S is the sum of the stream times.
template <class Rng>
TimingSheet simulate_sheet(const std::vector<QueryTemplate>& reads,
                           const std::vector<QueryTemplate>& refresh,
                           const IndexConfiguration& config, const CostModel& model,
                           std::size_t streams, Rng& rng) {
  TimingSheet sheet;
  sheet.streams = streams;
  sheet.scale_factor = model.scale_factor;
  for (const auto& q : reads) sheet.query_seconds.push_back(simulate_time(q, config, model, rng));
  for (const auto& r : refresh) sheet.refresh_seconds.push_back(simulate_time(r, config, model, rng));
  double total = 0.0;
  for (std::size_t s = 0; s < streams; ++s) {
    for (const auto& q : reads) total += simulate_time(q, config, model, rng);
    for (const auto& r : refresh) total += simulate_time(r, config, model, rng);
  }
  sheet.throughput_seconds = total;
  return sheet;
}

// Trimmed-mean protocol: qphh per repetition, highest and lowest dropped,
// remaining averaged. Power and throughput are trimmed the same way on their
// own, so qphh equals their geometric mean exactly only without jitter.
// Repetition r draws from its own stream seeded by (model.seed, r).
inline BenchmarkResult run_benchmark(const IndexConfiguration& config, const WorkloadSpec& workload,
                                     const CostModel& model, const BenchmarkOptions& options = {}) {
  model.validate();
  auto reads = read_templates(workload);
  if (reads.size() != kPowerQueries || workload.refresh.size() != kPowerRefreshes)
    throw std::invalid_argument("benchmark workload needs 22 read and 2 refresh templates, got " +
                                std::to_string(reads.size()) + " and " +
                                std::to_string(workload.refresh.size()));
  if (options.repetitions == 0) throw std::invalid_argument("benchmark needs at least one repetition");
  BenchmarkResult result;
  std::vector<double> power, throughput;
  for (std::size_t r = 0; r < options.repetitions; ++r) {
    std::seed_seq seq{model.seed, static_cast<std::uint64_t>(r)};
    std::mt19937_64 rng(seq);
    auto sheet = simulate_sheet(reads, workload.refresh, config, model, options.streams, rng);
    power.push_back(power_at_size(sheet));
    throughput.push_back(throughput_at_size(sheet));
    result.repetition_qphh.push_back(qphh(power.back(), throughput.back()));
    result.sheets.push_back(std::move(sheet));
  }
  result.power = trimmed_mean(power);
  result.throughput = trimmed_mean(throughput);
  result.qphh = trimmed_mean(result.repetition_qphh);
  result.index_size = index_size(config, model);
  return result;
}

struct NamedConfiguration {
  std::string name;
  IndexConfiguration config;
};

inline IndexConfiguration random_configuration(std::size_t columns, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  IndexConfiguration config(columns);
  for (std::size_t c = 0; c < columns; ++c) config.set(c, coin(rng));
  return config;
}

inline std::vector<NamedConfiguration> baseline_configs(const SchemaCatalog& catalog,
                                                        std::uint64_t random_seed = 0) {
  const auto n = catalog.indexable_count();
  return {
      {"default", IndexConfiguration(n)},
      {"all_indexed", IndexConfiguration(BitVector(n, 1))},
      {"random", random_configuration(n, random_seed)},
      {"ground_truth", IndexConfiguration(catalog.ground_truth_bits())},
  };
}

inline void write_benchmark_header(std::ostream& out, std::size_t repetitions) {
  out << "config_name,power,throughput,qphh,index_size";
  for (std::size_t r = 0; r < repetitions; ++r) out << ",qphh_rep" << r + 1;
  out << '\n';
}

inline void write_benchmark_row(std::ostream& out, const std::string& name,
                                const BenchmarkResult& result) {
  std::ostringstream row;
  row.precision(17);
  row << name << ',' << result.power << ',' << result.throughput << ',' << result.qphh << ','
      << result.index_size;
  for (double q : result.repetition_qphh) row << ',' << q;
  out << row.str() << '\n';
}

// Timing sheet CSV, one value per row:
//   kind,index,value
//   query,1..22,<seconds>   refresh,1..2,<seconds>
//   streams,0,<S>           throughput_seconds,0,<T_S>     scale_factor,0,<SF>
// Lines starting with '#' are comments.
inline TimingSheet read_timing_sheet(std::istream& in) {
  TimingSheet sheet;
  std::map<int, double> queries, refreshes;
  bool have_streams = false, have_total = false;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("kind", 0) == 0) continue;
    }
    std::stringstream ss(line);
    std::string kind, index, value;
    if (!std::getline(ss, kind, ',') || !std::getline(ss, index, ',') || !std::getline(ss, value))
      throw std::invalid_argument("malformed timing sheet row: " + line);
    int i = std::stoi(index);
    double v = std::stod(value);
    if (kind == "query") queries[i] = v;
    else if (kind == "refresh") refreshes[i] = v;
    else if (kind == "streams") { sheet.streams = static_cast<std::size_t>(v); have_streams = true; }
    else if (kind == "throughput_seconds") { sheet.throughput_seconds = v; have_total = true; }
    else if (kind == "scale_factor") sheet.scale_factor = v;
    else throw std::invalid_argument("unknown timing sheet row kind '" + kind + "'");
  }
  for (int i = 1; i <= static_cast<int>(kPowerQueries); ++i) {
    if (!queries.count(i)) throw std::invalid_argument("timing sheet is missing query " + std::to_string(i));
    sheet.query_seconds.push_back(queries[i]);
  }
  for (int j = 1; j <= static_cast<int>(kPowerRefreshes); ++j) {
    if (!refreshes.count(j)) throw std::invalid_argument("timing sheet is missing refresh " + std::to_string(j));
    sheet.refresh_seconds.push_back(refreshes[j]);
  }
  if (queries.size() != kPowerQueries || refreshes.size() != kPowerRefreshes)
    throw std::invalid_argument("timing sheet has extra query or refresh rows");
  if (!have_streams || !have_total)
    throw std::invalid_argument("timing sheet needs streams and throughput_seconds rows");
  return sheet;
}

inline void write_timing_sheet(std::ostream& out, const TimingSheet& sheet) {
  std::ostringstream s;
  s.precision(17);
  s << "kind,index,value\n";
  for (std::size_t i = 0; i < sheet.query_seconds.size(); ++i)
    s << "query," << i + 1 << ',' << sheet.query_seconds[i] << '\n';
  for (std::size_t j = 0; j < sheet.refresh_seconds.size(); ++j)
    s << "refresh," << j + 1 << ',' << sheet.refresh_seconds[j] << '\n';
  s << "streams,0," << sheet.streams << '\n';
  s << "throughput_seconds,0," << sheet.throughput_seconds << '\n';
  s << "scale_factor,0," << sheet.scale_factor << '\n';
  out << s.str();
}

}  // namespace autoindex
