#pragma once

// Schema model, index configuration and the backend contract through which
// index changes are applied.
//
// Only non-key columns are indexable. Primary/foreign key columns carry an
// implicit index that is never part of the configuration bit-vector, and the
// indexable columns get dense ordinals 0..C-1 in declaration order.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "autoindex/bits.hpp"

namespace autoindex {

struct ColumnDef {
  std::string name;
  bool is_key = false;

  bool indexable() const { return !is_key; }
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
};

class SchemaCatalog {
 public:
  struct ColumnRef {
    std::size_t table;
    std::size_t column;
  };

  SchemaCatalog() = default;

  // ground_truth lists qualified ("table.column") or bare column names; it is
  // optional and only used for reporting.
  explicit SchemaCatalog(std::vector<TableDef> tables,
                         const std::vector<std::string>& ground_truth = {})
      : tables_(std::move(tables)) {
    std::unordered_map<std::string, std::size_t> bare_count;
    for (std::size_t t = 0; t < tables_.size(); ++t) {
      const auto& table = tables_[t];
      if (table.name.empty()) throw std::invalid_argument("catalog: empty table name");
      for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto& col = table.columns[c];
        if (col.name.empty())
          throw std::invalid_argument("catalog: empty column name in table " + table.name);
        auto qualified = table.name + "." + col.name;
        if (!qualified_.emplace(qualified, ColumnRef{t, c}).second)
          throw std::invalid_argument("catalog: duplicate column " + qualified);
        ++bare_count[col.name];
        if (col.indexable()) {
          ordinal_of_[qualified] = indexable_.size();
          indexable_.push_back(ColumnRef{t, c});
        }
      }
    }
    for (const auto& [qualified, ref] : qualified_) {
      const auto& bare = tables_[ref.table].columns[ref.column].name;
      if (bare_count[bare] == 1) bare_alias_.emplace(bare, qualified);
    }
    for (const auto& name : ground_truth) {
      auto ord = ordinal_of(name);
      if (!ord) throw std::invalid_argument("catalog: ground-truth column '" + name +
                                            "' is unknown or not indexable");
      ground_truth_.push_back(*ord);
    }
  }

  const std::vector<TableDef>& tables() const { return tables_; }

  // C, the number of indexable columns.
  std::size_t indexable_count() const { return indexable_.size(); }

  std::size_t total_columns() const { return qualified_.size(); }
  std::size_t key_columns() const { return total_columns() - indexable_count(); }

  const ColumnRef& indexable_ref(std::size_t ordinal) const { return indexable_.at(ordinal); }

  std::string qualified_name(std::size_t ordinal) const {
    const auto& ref = indexable_.at(ordinal);
    return tables_[ref.table].name + "." + tables_[ref.table].columns[ref.column].name;
  }

  const std::string& column_name(std::size_t ordinal) const {
    const auto& ref = indexable_.at(ordinal);
    return tables_[ref.table].columns[ref.column].name;
  }

  // Accepts "table.column" or a bare column name when it is unambiguous.
  std::optional<std::size_t> ordinal_of(const std::string& name) const {
    auto it = ordinal_of_.find(name);
    if (it != ordinal_of_.end()) return it->second;
    auto alias = bare_alias_.find(name);
    if (alias == bare_alias_.end()) return std::nullopt;
    it = ordinal_of_.find(alias->second);
    if (it == ordinal_of_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t require_ordinal(const std::string& name) const {
    auto ord = ordinal_of(name);
    if (!ord) throw std::invalid_argument("unknown or non-indexable column '" + name + "'");
    return *ord;
  }

  const std::vector<std::size_t>& ground_truth() const { return ground_truth_; }

  BitVector ground_truth_bits() const {
    BitVector bits(indexable_count(), 0);
    for (auto c : ground_truth_) bits[c] = 1;
    return bits;
  }

 private:
  std::vector<TableDef> tables_;
  std::vector<ColumnRef> indexable_;
  std::unordered_map<std::string, ColumnRef> qualified_;
  std::unordered_map<std::string, std::size_t> ordinal_of_;
  std::unordered_map<std::string, std::string> bare_alias_;
  std::vector<std::size_t> ground_truth_;
};

// The 8-table TPC-H schema. Key columns are the primary keys plus the foreign
// keys that TPC-H indexes by default.
inline SchemaCatalog builtin_tpch_catalog() {
  auto key = [](std::string n) { return ColumnDef{std::move(n), true}; };
  auto col = [](std::string n) { return ColumnDef{std::move(n), false}; };
  std::vector<TableDef> tables{
      {"region", {key("r_regionkey"), col("r_name"), col("r_comment")}},
      {"nation", {key("n_nationkey"), col("n_name"), key("n_regionkey"), col("n_comment")}},
      {"part",
       {key("p_partkey"), col("p_name"), col("p_mfgr"), col("p_brand"), col("p_type"),
        col("p_size"), col("p_container"), col("p_retailprice"), col("p_comment")}},
      {"supplier",
       {key("s_suppkey"), col("s_name"), col("s_address"), key("s_nationkey"), col("s_phone"),
        col("s_acctbal"), col("s_comment")}},
      {"partsupp",
       {key("ps_partkey"), key("ps_suppkey"), col("ps_availqty"), col("ps_supplycost"),
        col("ps_comment")}},
      {"customer",
       {key("c_custkey"), col("c_name"), col("c_address"), key("c_nationkey"), col("c_phone"),
        col("c_acctbal"), col("c_mktsegment"), col("c_comment")}},
      {"orders",
       {key("o_orderkey"), key("o_custkey"), col("o_orderstatus"), col("o_totalprice"),
        col("o_orderdate"), col("o_orderpriority"), col("o_clerk"), col("o_shippriority"),
        col("o_comment")}},
      {"lineitem",
       {key("l_orderkey"), key("l_partkey"), key("l_suppkey"), key("l_linenumber"),
        col("l_quantity"), col("l_extendedprice"), col("l_discount"), col("l_tax"),
        col("l_returnflag"), col("l_linestatus"), col("l_shipdate"), col("l_commitdate"),
        col("l_receiptdate"), col("l_shipinstruct"), col("l_shipmode"), col("l_comment")}},
  };
  return SchemaCatalog(std::move(tables),
                       {"customer.c_acctbal", "lineitem.l_shipdate", "orders.o_orderdate",
                        "part.p_brand", "part.p_container", "part.p_size"});
}

// Number of distinct single-column index configurations, 2^C.
inline std::uint64_t configuration_count(std::size_t indexable_columns) {
  if (indexable_columns >= 64) throw std::overflow_error("configuration_count: 2^C exceeds 64 bits");
  return std::uint64_t{1} << indexable_columns;
}

inline std::uint64_t configuration_count(const SchemaCatalog& catalog) {
  return configuration_count(catalog.indexable_count());
}

// Schema file format (JSON):
//   {"tables": [{"name": "t", "columns": [{"name": "id", "key": true}, {"name": "x"}]}],
//    "ground_truth": ["t.x"]}
inline SchemaCatalog catalog_from_json(const nlohmann::json& doc) {
  std::vector<TableDef> tables;
  for (const auto& t : doc.at("tables")) {
    TableDef table{t.at("name").get<std::string>(), {}};
    for (const auto& c : t.at("columns")) {
      table.columns.push_back(ColumnDef{c.at("name").get<std::string>(), c.value("key", false)});
    }
    tables.push_back(std::move(table));
  }
  std::vector<std::string> gt;
  if (doc.contains("ground_truth")) gt = doc.at("ground_truth").get<std::vector<std::string>>();
  return SchemaCatalog(std::move(tables), gt);
}

inline SchemaCatalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open catalog file " + path);
  try {
    return catalog_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed catalog file " + path + ": " + e.what());
  }
}

inline nlohmann::json catalog_to_json(const SchemaCatalog& catalog) {
  nlohmann::json doc;
  doc["tables"] = nlohmann::json::array();
  for (const auto& t : catalog.tables()) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"key", c.is_key}});
    doc["tables"].push_back({{"name", t.name}, {"columns", cols}});
  }
  std::vector<std::string> gt;
  for (auto c : catalog.ground_truth()) gt.push_back(catalog.qualified_name(c));
  doc["ground_truth"] = gt;
  return doc;
}

class IndexConfiguration {
 public:
  IndexConfiguration() = default;
  explicit IndexConfiguration(std::size_t columns) : bits_(columns, 0) {}
  explicit IndexConfiguration(BitVector bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  std::size_t size() const { return bits_.size(); }
  bool indexed(std::size_t ordinal) const { return bits_.at(ordinal) != 0; }
  std::size_t count() const { return popcount(bits_); }
  const BitVector& bits() const { return bits_; }

  void set(std::size_t ordinal, bool on) { bits_.at(ordinal) = on ? 1 : 0; }

  friend bool operator==(const IndexConfiguration&, const IndexConfiguration&) = default;

 private:
  BitVector bits_;
};

enum class CommandKind { CreateIndex, DropIndex };

inline const char* to_string(CommandKind kind) {
  return kind == CommandKind::CreateIndex ? "create" : "drop";
}

struct BackendCommand {
  CommandKind kind;
  std::size_t column;
  std::uint64_t timestamp = 0;
};

struct ApplyResult {
  IndexConfiguration config;
  bool changed;
};

// Creating an existing index or dropping a missing one is a no-effect
// outcome, not an error.
inline ApplyResult apply_command(const IndexConfiguration& config, const BackendCommand& cmd) {
  if (cmd.column >= config.size()) {
    throw std::out_of_range("index command on column ordinal " + std::to_string(cmd.column) +
                            " but only " + std::to_string(config.size()) +
                            " indexable columns exist");
  }
  const bool want = cmd.kind == CommandKind::CreateIndex;
  ApplyResult result{config, config.indexed(cmd.column) != want};
  result.config.set(cmd.column, want);
  return result;
}

// Persistence contract for index changes. The simulator below is the only
// shipped implementation; an adapter for a live DBMS would implement the same
// interface.
class IndexBackend {
 public:
  virtual ~IndexBackend() = default;
  virtual const IndexConfiguration& configuration() const = 0;
  virtual ApplyResult apply(const BackendCommand& cmd) = 0;
  virtual void reset(const IndexConfiguration& config) = 0;
};

class SimulatedBackend final : public IndexBackend {
 public:
  explicit SimulatedBackend(std::size_t columns) : initial_(columns), current_(columns) {}
  explicit SimulatedBackend(IndexConfiguration initial)
      : initial_(initial), current_(std::move(initial)) {}

  const IndexConfiguration& configuration() const override { return current_; }

  ApplyResult apply(const BackendCommand& cmd) override {
    auto result = apply_command(current_, cmd);
    current_ = result.config;
    log_.push_back(cmd);
    return result;
  }

  void reset(const IndexConfiguration& config) override {
    initial_ = config;
    current_ = config;
    log_.clear();
  }

  const IndexConfiguration& initial() const { return initial_; }
  const std::vector<BackendCommand>& log() const { return log_; }

 private:
  IndexConfiguration initial_;
  IndexConfiguration current_;
  std::vector<BackendCommand> log_;
};

inline IndexConfiguration replay(IndexConfiguration config, const std::vector<BackendCommand>& log) {
  for (const auto& cmd : log) config = apply_command(config, cmd).config;
  return config;
}

inline void write_command_log_csv(std::ostream& out, const SchemaCatalog& catalog,
                                  const std::vector<BackendCommand>& log) {
  out << "step,kind,column\n";
  for (const auto& cmd : log) {
    out << cmd.timestamp << ',' << to_string(cmd.kind) << ',' << catalog.qualified_name(cmd.column)
        << '\n';
  }
}

// Plain text form of a configuration: one qualified column name per line.
inline void write_configuration(std::ostream& out, const SchemaCatalog& catalog,
                                const IndexConfiguration& config) {
  for (std::size_t c = 0; c < config.size(); ++c)
    if (config.indexed(c)) out << catalog.qualified_name(c) << '\n';
}

inline IndexConfiguration read_configuration(std::istream& in, const SchemaCatalog& catalog) {
  IndexConfiguration config(catalog.indexable_count());
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto last = line.find_last_not_of(" \t\r");
    config.set(catalog.require_ordinal(line.substr(first, last - first + 1)), true);
  }
  return config;
}

}  // namespace autoindex
