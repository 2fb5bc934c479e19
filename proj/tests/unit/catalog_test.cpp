#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "autoindex/catalog.hpp"
#include "helpers.hpp"

using namespace autoindex;
using testutil::config;

TEST(Catalog, BuiltinTotals) {
  auto cat = builtin_tpch_catalog();
  EXPECT_EQ(cat.tables().size(), 8u);
  EXPECT_EQ(cat.total_columns(), 61u);
  EXPECT_EQ(cat.key_columns(), 16u);
  EXPECT_EQ(cat.indexable_count(), 45u);
  EXPECT_EQ(cat.ground_truth().size(), 6u);
}

TEST(Catalog, BuiltinPerTableCounts) {
  // table, columns, key columns
  const std::vector<std::tuple<std::string, int, int>> expected{
      {"region", 3, 1},  {"nation", 4, 2},   {"part", 9, 1},     {"supplier", 7, 2},
      {"partsupp", 5, 2}, {"customer", 8, 2}, {"orders", 9, 2}, {"lineitem", 16, 4}};
  auto cat = builtin_tpch_catalog();
  for (const auto& [name, cols, keys] : expected) {
    auto it = std::find_if(cat.tables().begin(), cat.tables().end(), [&](const auto& t) { return t.name == name; });
    ASSERT_NE(it, cat.tables().end()) << name;
    EXPECT_EQ(static_cast<int>(it->columns.size()), cols) << name;
    int k = 0;
    for (const auto& c : it->columns) k += c.is_key ? 1 : 0;
    EXPECT_EQ(k, keys) << name;
  }
}

TEST(Catalog, GroundTruthNames) {
  auto cat = builtin_tpch_catalog();
  std::vector<std::string> names;
  for (auto c : cat.ground_truth()) names.push_back(cat.qualified_name(c));
  std::sort(names.begin(), names.end());
  EXPECT_EQ(names, (std::vector<std::string>{"customer.c_acctbal", "lineitem.l_shipdate", "orders.o_orderdate",
                                             "part.p_brand", "part.p_container", "part.p_size"}));
  EXPECT_EQ(popcount(cat.ground_truth_bits()), 6u);
}

TEST(Catalog, OrdinalLookup) {
  auto cat = builtin_tpch_catalog();
  auto o = cat.require_ordinal("l_shipdate");
  EXPECT_EQ(cat.qualified_name(o), "lineitem.l_shipdate");
  EXPECT_EQ(cat.ordinal_of("lineitem.l_shipdate"), o);
  EXPECT_FALSE(cat.ordinal_of("lineitem.l_orderkey").has_value());  // key column
  EXPECT_THROW(cat.require_ordinal("nope"), std::invalid_argument);
}

TEST(Catalog, ConfigurationCount) {
  EXPECT_EQ(configuration_count(builtin_tpch_catalog()), 35184372088832ull);
  EXPECT_EQ(configuration_count(std::size_t{0}), 1u);
  EXPECT_EQ(configuration_count(std::size_t{3}), 8u);
  EXPECT_THROW(configuration_count(std::size_t{64}), std::overflow_error);
}

TEST(Catalog, DuplicateColumnsRejected) {
  std::vector<TableDef> t{{"a", {{"x", false}, {"x", false}}}};
  EXPECT_THROW(SchemaCatalog{t}, std::invalid_argument);
}

TEST(Catalog, JsonRoundTrip) {
  auto cat = builtin_tpch_catalog();
  auto back = catalog_from_json(catalog_to_json(cat));
  EXPECT_EQ(back.indexable_count(), 45u);
  EXPECT_EQ(back.ground_truth(), cat.ground_truth());
  for (std::size_t c = 0; c < 45; ++c) EXPECT_EQ(back.qualified_name(c), cat.qualified_name(c));
}

TEST(ApplyCommand, Examples) {
  auto r = apply_command(config({1, 0, 0}), {CommandKind::CreateIndex, 1});
  EXPECT_EQ(r.config, config({1, 1, 0}));
  EXPECT_TRUE(r.changed);
  r = apply_command(config({1, 0, 0}), {CommandKind::DropIndex, 0});
  EXPECT_EQ(r.config, config({0, 0, 0}));
  EXPECT_TRUE(r.changed);
  r = apply_command(config({1, 0, 0}), {CommandKind::CreateIndex, 0});
  EXPECT_EQ(r.config, config({1, 0, 0}));
  EXPECT_FALSE(r.changed);
  r = apply_command(config({1, 0, 0}), {CommandKind::DropIndex, 2});
  EXPECT_FALSE(r.changed);
  EXPECT_THROW(apply_command(config({1, 0, 0}), {CommandKind::CreateIndex, 3}), std::out_of_range);
}

TEST(SimulatedBackend, LogReplayMatchesState) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    SimulatedBackend backend(10);
    std::uniform_int_distribution<std::size_t> col(0, 9);
    std::bernoulli_distribution create(0.5);
    for (int i = 0; i < 200; ++i) {
      backend.apply({create(rng) ? CommandKind::CreateIndex : CommandKind::DropIndex, col(rng),
                     static_cast<std::uint64_t>(i)});
      ASSERT_LE(backend.configuration().count(), 10u);
    }
    EXPECT_EQ(replay(backend.initial(), backend.log()), backend.configuration());
  }
}

TEST(ConfigurationFile, RoundTrip) {
  auto cat = builtin_tpch_catalog();
  IndexConfiguration c(cat.ground_truth_bits());
  std::stringstream s;
  s << "# comment\n";
  write_configuration(s, cat, c);
  EXPECT_EQ(read_configuration(s, cat), c);
}

TEST(CommandLog, Csv) {
  auto cat = builtin_tpch_catalog();
  std::ostringstream out;
  write_command_log_csv(out, cat, {{CommandKind::CreateIndex, cat.require_ordinal("p_size"), 7}});
  EXPECT_EQ(out.str(), "step,kind,column\n7,create,part.p_size\n");
}
