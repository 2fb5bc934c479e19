#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "autoindex/benchmark.hpp"
#include "helpers.hpp"
#include "metric_oracle.hpp"

using namespace autoindex;
using testutil::query;

namespace {
TimingSheet uniform_sheet(double t, std::size_t streams, double total, double sf) {
  TimingSheet s;
  s.query_seconds.assign(22, t);
  s.refresh_seconds.assign(2, t);
  s.streams = streams;
  s.throughput_seconds = total;
  s.scale_factor = sf;
  return s;
}
}  // namespace

TEST(CostModel, Examples) {
  CostModel m;
  m.jitter = 0.0;
  m.index_speedup = 10.0;
  auto q = query(1, {0}, 100.0);
  EXPECT_DOUBLE_EQ(expected_time(q, testutil::config({1, 0}), m), 10.0);
  QueryTemplate rf{101, "RF1", {}, 50.0, QueryKind::Refresh};
  IndexConfiguration six(BitVector(10, 0));
  for (int i = 0; i < 6; ++i) six.set(i, true);
  EXPECT_DOUBLE_EQ(expected_time(rf, six, m), 80.0);
  m.scale_factor = 10;
  EXPECT_DOUBLE_EQ(expected_time(q, testutil::config({0, 1}), m), 1000.0);
}

TEST(CostModel, CapLimitsSpeedup) {
  CostModel m;
  m.index_speedup = 2.0;
  auto q = query(1, {0, 1, 2}, 80.0);
  EXPECT_DOUBLE_EQ(expected_time(q, testutil::config({1, 1, 1}), m), 20.0);
  EXPECT_DOUBLE_EQ(expected_time(q, testutil::config({1, 1, 0}), m), 20.0);
  EXPECT_DOUBLE_EQ(expected_time(q, testutil::config({1, 0, 0}), m), 40.0);
}

TEST(CostModel, Monotonicity) {
  CostModel m;
  std::mt19937_64 rng(1);
  std::bernoulli_distribution bit(0.5);
  std::uniform_int_distribution<std::size_t> col(0, 7);
  QueryTemplate rf{101, "RF1", {}, 20.0, QueryKind::Refresh};
  for (int trial = 0; trial < 500; ++trial) {
    BitVector bits(8);
    for (auto& b : bits) b = bit(rng);
    IndexConfiguration c(bits);
    auto q = query(1, {col(rng)}, 10.0);
    auto c2 = c;
    c2.set(col(rng), true);
    EXPECT_LE(expected_time(q, c2, m), expected_time(q, c, m));
    if (c2 != c) EXPECT_GT(expected_time(rf, c2, m), expected_time(rf, c, m));
  }
}

TEST(CostModel, JitterBounds) {
  CostModel m;
  std::mt19937_64 rng(2);
  auto q = query(1, {}, 10.0);
  for (int i = 0; i < 1000; ++i) {
    double t = simulate_time(q, IndexConfiguration(2), m, rng);
    EXPECT_GE(t, 9.8);
    EXPECT_LE(t, 10.2);
  }
  m.scale_factor = 0.5;
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(Metrics, Trivial) {
  EXPECT_EQ(power_at_size(uniform_sheet(1.0, 1, 3600, 1)), 3600.0);
  EXPECT_DOUBLE_EQ(power_at_size(uniform_sheet(2.0, 1, 3600, 1)), 1800.0);
  EXPECT_EQ(throughput_at_size(1, 3600, 1), 22.0);
  EXPECT_EQ(throughput_at_size(2, 7200, 1), 22.0);
  EXPECT_EQ(throughput_at_size(2, 3600, 10), 440.0);
  EXPECT_EQ(qphh(100, 100), 100.0);
  EXPECT_NEAR(qphh(3600, 22), 281.42494558940577, 1e-10);
  EXPECT_EQ(qphh(3600, 22), qphh(22, 3600));
}

TEST(Metrics, Rejections) {
  auto s = uniform_sheet(1.0, 1, 3600, 1);
  s.query_seconds[3] = 0.0;
  EXPECT_THROW(power_at_size(s), std::invalid_argument);
  s = uniform_sheet(1.0, 1, 3600, 1);
  s.refresh_seconds.pop_back();
  EXPECT_THROW(power_at_size(s), std::invalid_argument);
  EXPECT_THROW(throughput_at_size(1, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(throughput_at_size(0, 10.0, 1), std::invalid_argument);
  EXPECT_THROW(qphh(-1, 3), std::invalid_argument);
}

TEST(Metrics, AgreeWithHighPrecisionOracle) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    auto s = oracle::random_sheet(rng);
    auto ref = oracle::evaluate(s);
    EXPECT_LE(oracle::relative_error(power_at_size(s), ref.power), 1e-9);
    EXPECT_LE(oracle::relative_error(throughput_at_size(s), ref.throughput), 1e-9);
    EXPECT_LE(oracle::relative_error(qphh(s), ref.qphh), 1e-9);
  }
}

TEST(Metrics, HomogeneityAndLinearity) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    auto s = oracle::random_sheet(rng);
    s.scale_factor = 1;
    const double p = power_at_size(s), t = throughput_at_size(s), q = qphh(s);
    for (double sf : {10.0, 100.0}) {
      s.scale_factor = sf;
      EXPECT_NEAR(power_at_size(s) / p, sf, sf * 1e-12);
      EXPECT_NEAR(throughput_at_size(s) / t, sf, sf * 1e-12);
      EXPECT_NEAR(qphh(s) / q, sf, sf * 1e-12);
    }
    EXPECT_NEAR(qphh(3 * p, 3 * t), 3 * qphh(p, t), 1e-9 * qphh(p, t));
  }
}

TEST(TrimmedMean, DropsExtremes) {
  EXPECT_DOUBLE_EQ(trimmed_mean({1, 2, 3, 100}), 2.5);
  EXPECT_DOUBLE_EQ(trimmed_mean({5}), 5.0);
  EXPECT_THROW(trimmed_mean({}), std::invalid_argument);
}

TEST(Benchmark, ZeroJitterRepetitionsIdentical) {
  auto cat = builtin_tpch_catalog();
  auto w = tpch_fixed_workload(cat);
  CostModel m;
  m.jitter = 0.0;
  auto r = run_benchmark(IndexConfiguration(cat.ground_truth_bits()), w, m);
  ASSERT_EQ(r.repetition_qphh.size(), 12u);
  for (double q : r.repetition_qphh) EXPECT_EQ(q, r.repetition_qphh[0]);
  EXPECT_DOUBLE_EQ(r.qphh, r.repetition_qphh[0]);
  EXPECT_DOUBLE_EQ(r.qphh, qphh(r.power, r.throughput));
}

TEST(Benchmark, Orderings) {
  auto cat = builtin_tpch_catalog();
  auto w = tpch_fixed_workload(cat);
  CostModel m;
  auto named = baseline_configs(cat, 5);
  ASSERT_EQ(named.size(), 4u);
  std::map<std::string, BenchmarkResult> r;
  for (const auto& n : named) r[n.name] = run_benchmark(n.config, w, m);
  EXPECT_GT(r["ground_truth"].qphh, r["default"].qphh);
  EXPECT_GT(r["ground_truth"].qphh, r["all_indexed"].qphh);
  EXPECT_EQ(r["all_indexed"].index_size, 45.0);
  EXPECT_EQ(r["default"].index_size, 0.0);
  EXPECT_EQ(r["ground_truth"].index_size, 6.0);
  for (const auto& [name, res] : r) EXPECT_LE(res.index_size, r["all_indexed"].index_size) << name;
}

TEST(Benchmark, Baselines) {
  auto cat = builtin_tpch_catalog();
  auto named = baseline_configs(cat, 5);
  std::map<std::string, IndexConfiguration> m;
  for (auto& n : named) m[n.name] = n.config;
  EXPECT_EQ(m["default"].count(), 0u);
  EXPECT_EQ(m["all_indexed"].count(), 45u);
  EXPECT_EQ(m["ground_truth"].bits(), cat.ground_truth_bits());
  EXPECT_EQ(m["random"], random_configuration(45, 5));
  EXPECT_NE(random_configuration(45, 5), random_configuration(45, 6));
}

TEST(Benchmark, RejectsMalformedWorkload) {
  auto w = testutil::single_segment({query(1, {})});
  EXPECT_THROW(run_benchmark(IndexConfiguration(1), w, CostModel{}), std::invalid_argument);
}

TEST(Benchmark, Deterministic) {
  auto cat = builtin_tpch_catalog();
  auto w = tpch_fixed_workload(cat);
  CostModel m;
  m.seed = 9;
  auto a = run_benchmark(IndexConfiguration(45), w, m), b = run_benchmark(IndexConfiguration(45), w, m);
  EXPECT_EQ(a.repetition_qphh, b.repetition_qphh);
}

TEST(TimingSheetCsv, RoundTrip) {
  std::mt19937_64 rng(6);
  auto s = oracle::random_sheet(rng);
  std::stringstream io;
  write_timing_sheet(io, s);
  auto back = read_timing_sheet(io);
  EXPECT_EQ(back.query_seconds, s.query_seconds);
  EXPECT_EQ(back.refresh_seconds, s.refresh_seconds);
  EXPECT_EQ(back.streams, s.streams);
  EXPECT_EQ(back.throughput_seconds, s.throughput_seconds);
  EXPECT_EQ(back.scale_factor, s.scale_factor);
}

TEST(BenchmarkCsv, HeaderAndRow) {
  std::ostringstream out;
  write_benchmark_header(out, 2);
  EXPECT_EQ(out.str(), "config_name,power,throughput,qphh,index_size,qphh_rep1,qphh_rep2\n");
}
