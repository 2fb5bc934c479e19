#include <gtest/gtest.h>

#include <map>
#include <random>

#include "autoindex/environment.hpp"
#include "helpers.hpp"

using namespace autoindex;
using testutil::config;
using testutil::query;

namespace {
UsageTracker window_of(std::size_t columns, std::vector<std::vector<std::size_t>> benefits, std::size_t horizon = 22) {
  UsageTracker t(horizon, columns);
  int id = 0;
  for (auto& b : benefits) t.observe(query(++id, b));
  return t;
}
}  // namespace

TEST(EncodeState, Examples) {
  EXPECT_EQ(encode_state(config({1, 0, 0}), window_of(3, {{0}})).bits, (BitVector{1, 0, 0, 1, 0, 0}));
  EXPECT_EQ(encode_state(config({0, 0, 0}), window_of(3, {{0}, {1, 2}})).bits, (BitVector{0, 0, 0, 0, 0, 0}));
  auto s = encode_state(config({1, 1, 0}), window_of(3, {{1}}));
  EXPECT_EQ(s.bits, (BitVector{1, 1, 0, 0, 1, 0}));
  EXPECT_EQ(s.index_half(), (BitVector{1, 1, 0}));
  EXPECT_EQ(s.usage_half(), (BitVector{0, 1, 0}));
  EXPECT_THROW(encode_state(config({1, 1}), window_of(3, {})), std::invalid_argument);
}

TEST(Reward, TruthTable) {
  EXPECT_EQ(compute_reward(1, 1), 1.0);
  EXPECT_EQ(compute_reward(1, 0), -5.0);
  EXPECT_EQ(compute_reward(0, 1), -5.0);
  EXPECT_EQ(compute_reward(0, 0), 1.0);
  EXPECT_THROW(compute_reward(2, 0), std::invalid_argument);
  EXPECT_GT(-kMismatchReward, 2 * kMatchReward);
}

TEST(Actions, Indexing) {
  EXPECT_EQ(action_count(45), 46u);
  EXPECT_EQ(action_from_index(3, 5), Action(Flip{3}));
  EXPECT_EQ(action_from_index(5, 5), Action(NoOp{}));
  EXPECT_THROW(action_from_index(6, 5), std::out_of_range);
  for (std::size_t i = 0; i <= 5; ++i) EXPECT_EQ(action_index(action_from_index(i, 5), 5), i);
  EXPECT_EQ(describe(Flip{2}), "flip:2");
  EXPECT_EQ(describe(NoOp{}), "noop");
}

TEST(Transition, Examples) {
  auto spec = testutil::single_segment({query(1, {0})});
  {
    SimulatedBackend backend(3);
    UsageTracker tracker(4, 3);
    auto out = transition(backend, tracker, spec, Flip{0}, 0, 1);
    EXPECT_EQ(out.reward, 1.0);
    EXPECT_EQ(out.next_state.bits, (BitVector{1, 0, 0, 1, 0, 0}));
    ASSERT_TRUE(out.info.command.has_value());
    EXPECT_EQ(out.info.command->kind, CommandKind::CreateIndex);
    EXPECT_EQ(out.info.queries, std::vector<int>{1});
  }
  {
    SimulatedBackend backend(config({1, 0, 0}));
    UsageTracker tracker(4, 3);
    auto out = transition(backend, tracker, spec, NoOp{}, 0, 1);
    EXPECT_EQ(out.reward, 0.0);
    EXPECT_EQ(backend.configuration(), config({1, 0, 0}));
    EXPECT_FALSE(out.info.command.has_value());
  }
  {
    SimulatedBackend backend(config({1, 0, 0}));
    UsageTracker tracker(4, 3);
    auto out = transition(backend, tracker, spec, Flip{0}, 0, 1);
    EXPECT_EQ(out.reward, -5.0);  // dropping a demanded index
    EXPECT_EQ(out.next_state.bits, (BitVector{0, 0, 0, 0, 0, 0}));
  }
}

TEST(Transition, ObservesQueriesBeforeAction) {
  // The only query demands column 2; creating it on the first step is already rewarded.
  auto spec = testutil::single_segment({query(1, {2})});
  SimulatedBackend backend(3);
  UsageTracker tracker(1, 3);
  EXPECT_EQ(transition(backend, tracker, spec, Flip{2}, 0, 1).reward, 1.0);
}

TEST(Transition, QueriesPerStep) {
  auto spec = testutil::single_segment({query(1, {}), query(2, {}), query(3, {})});
  SimulatedBackend backend(3);
  UsageTracker tracker(10, 3);
  auto out = transition(backend, tracker, spec, NoOp{}, 1, 2);
  EXPECT_EQ(out.info.queries, (std::vector<int>{3, 1}));
}

// Every (configuration, demand set, action) for C = 1..4 against a direct
// table lookup of the four reward cases.
TEST(Transition, ExhaustiveSmallC) {
  const std::map<std::pair<int, int>, double> table{{{1, 1}, 1.0}, {{1, 0}, -5.0}, {{0, 1}, -5.0}, {{0, 0}, 1.0}};
  for (std::size_t C = 1; C <= 4; ++C) {
    auto spec = testutil::single_segment({query(99, {})});
    for (unsigned cfg = 0; cfg < (1u << C); ++cfg) {
      for (unsigned demand = 0; demand < (1u << C); ++demand) {
        for (std::size_t a = 0; a <= C; ++a) {
          BitVector bits(C);
          for (std::size_t c = 0; c < C; ++c) bits[c] = (cfg >> c) & 1u;
          SimulatedBackend backend{IndexConfiguration(bits)};
          UsageTracker tracker(C + 2, C);
          for (std::size_t c = 0; c < C; ++c)
            if ((demand >> c) & 1u) tracker.observe(query(static_cast<int>(c), {c}));
          auto out = transition(backend, tracker, spec, action_from_index(a, C), 0, 1);

          ASSERT_EQ(out.next_state.size(), 2 * C);
          if (a == C) {
            EXPECT_EQ(out.reward, 0.0);
            EXPECT_EQ(backend.configuration().bits(), bits);
            continue;
          }
          const int op = bits[a] ? 0 : 1;
          const int use = (demand >> a) & 1u;
          EXPECT_EQ(out.reward, table.at({op, use})) << "C=" << C << " cfg=" << cfg << " demand=" << demand;
          EXPECT_EQ(out.next_state.bits[a], op);
          for (std::size_t c = 0; c < C; ++c)
            EXPECT_EQ(out.next_state.bits[C + c], out.next_state.bits[c] & ((demand >> c) & 1u));
        }
      }
    }
  }
}

TEST(Environment, FlipInvolution) {
  auto cat = builtin_tpch_catalog();
  auto spec = tpch_fixed_workload(cat);
  EnvironmentOptions opts;
  opts.queries_per_step = 0;  // no intervening queries
  Environment env(45, spec, opts);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> col(0, 44);
  for (int i = 0; i < 100; ++i) {
    auto before = env.configuration();
    auto c = col(rng);
    env.step(Flip{c});
    EXPECT_NE(env.configuration(), before);
    env.step(Flip{c});
    EXPECT_EQ(env.configuration(), before);
    env.step(Flip{col(rng)});
  }
}

TEST(Environment, ScaleIndependence) {
  auto cat = builtin_tpch_catalog();
  auto spec = tpch_shifting_workload(cat, 50);
  std::vector<std::vector<std::pair<BitVector, double>>> traces;
  std::vector<double> seconds;
  for (double sf : {1.0, 10.0, 100.0}) {
    EnvironmentOptions opts;
    opts.cost_model.scale_factor = sf;
    Environment env(45, spec, opts);
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> a(0, 45);
    std::vector<std::pair<BitVector, double>> trace;
    double total = 0.0;
    for (int i = 0; i < 500; ++i) {
      auto out = env.step(action_from_index(a(rng), 45));
      trace.emplace_back(out.next_state.bits, out.reward);
      total += out.info.simulated_seconds;
    }
    traces.push_back(trace);
    seconds.push_back(total);
  }
  EXPECT_EQ(traces[0], traces[1]);
  EXPECT_EQ(traces[0], traces[2]);
  EXPECT_NEAR(seconds[1] / seconds[0], 10.0, 1e-9);
  EXPECT_NEAR(seconds[2] / seconds[0], 100.0, 1e-9);
}

TEST(Environment, RestoreMatchesStepping) {
  auto cat = builtin_tpch_catalog();
  auto spec = tpch_shifting_workload(cat, 30);
  Environment a(45, spec, {});
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> act(0, 45);
  for (int i = 0; i < 77; ++i) a.step(action_from_index(act(rng), 45));
  Environment b(45, spec, {});
  b.restore(a.configuration(), a.steps_taken());
  EXPECT_EQ(b.state(), a.state());
  EXPECT_EQ(b.active_segment(), a.active_segment());
  for (int i = 0; i < 40; ++i) {
    auto action = action_from_index(act(rng), 45);
    auto x = a.step(action), y = b.step(action);
    EXPECT_EQ(x.next_state, y.next_state);
    EXPECT_EQ(x.reward, y.reward);
  }
}

TEST(Environment, RewardsInRange) {
  auto cat = builtin_tpch_catalog();
  Environment env(45, tpch_fixed_workload(cat), {});
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> act(0, 45);
  for (int i = 0; i < 2000; ++i) {
    auto out = env.step(action_from_index(act(rng), 45));
    EXPECT_TRUE(out.reward == 1.0 || out.reward == -5.0 || out.reward == 0.0);
    ASSERT_EQ(out.next_state.size(), 90u);
    for (std::size_t c = 0; c < 45; ++c) EXPECT_LE(out.next_state.bits[45 + c], out.next_state.bits[c]);
  }
}

TEST(TraceCsv, Format) {
  std::ostringstream out;
  write_trace_csv(out, {{0, Flip{1}, 1.0, 1, 1}, {1, NoOp{}, 0.0, 1, 1}});
  EXPECT_EQ(out.str(), "step,action,reward,total_indexes,total_optimal_indexes\n0,flip:1,1,1,1\n1,noop,0,1,1\n");
}
