#pragma once

// Query templates, workload streams and the horizon-H usage tracker.
//
// Index usage is declarative: every template names the indexable columns an
// index would accelerate (its benefit set). The set of indexes a query
// actually uses under a configuration is the intersection of that benefit set
// with the indexed columns.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "autoindex/bits.hpp"
#include "autoindex/catalog.hpp"

namespace autoindex {

enum class QueryKind { Read, Refresh };

struct QueryTemplate {
  int id = 0;
  std::string name;
  std::vector<std::size_t> benefit_set;  // sorted, unique ordinals
  double base_cost = 1.0;
  QueryKind kind = QueryKind::Read;
};

enum class StreamOrder { RoundRobin, UniformRandom };

struct WorkloadSegment {
  std::string name;
  std::vector<QueryTemplate> templates;
  std::uint64_t length = 0;  // queries before the stream moves to the next segment
};

// Segments are visited in order and the sequence wraps around, so a
// two-segment workload alternates indefinitely.
struct WorkloadSpec {
  std::string name;
  std::vector<WorkloadSegment> segments;
  StreamOrder order = StreamOrder::RoundRobin;
  std::uint64_t seed = 0;
  // Write templates. Used by the benchmark harness only, never streamed to
  // the agent.
  std::vector<QueryTemplate> refresh;
};

inline void validate(const WorkloadSpec& spec, std::size_t indexable_columns) {
  if (spec.segments.empty()) throw std::invalid_argument("workload has no segments");
  auto check = [&](const QueryTemplate& q) {
    if (!(q.base_cost > 0.0))
      throw std::invalid_argument("query template " + std::to_string(q.id) +
                                  " has non-positive base cost");
    for (auto c : q.benefit_set)
      if (c >= indexable_columns)
        throw std::invalid_argument("query template " + std::to_string(q.id) +
                                    " references column ordinal out of range");
    if (!std::is_sorted(q.benefit_set.begin(), q.benefit_set.end()) ||
        std::adjacent_find(q.benefit_set.begin(), q.benefit_set.end()) != q.benefit_set.end())
      throw std::invalid_argument("query template " + std::to_string(q.id) +
                                  " benefit set must be sorted and unique");
  };
  for (const auto& seg : spec.segments) {
    if (seg.templates.empty()) throw std::invalid_argument("workload segment is empty");
    if (seg.length == 0) throw std::invalid_argument("workload segment length must be > 0");
    for (const auto& q : seg.templates) check(q);
  }
  for (const auto& q : spec.refresh) check(q);
}

inline std::uint64_t cycle_length(const WorkloadSpec& spec) {
  std::uint64_t total = 0;
  for (const auto& seg : spec.segments) total += seg.length;
  return total;
}

struct SegmentPosition {
  std::size_t segment;
  std::uint64_t offset;
};

inline SegmentPosition segment_position(const WorkloadSpec& spec, std::uint64_t step) {
  auto pos = step % cycle_length(spec);
  for (std::size_t s = 0; s < spec.segments.size(); ++s) {
    if (pos < spec.segments[s].length) return {s, pos};
    pos -= spec.segments[s].length;
  }
  return {spec.segments.size() - 1, 0};  // unreachable for a valid spec
}

inline std::size_t segment_at(const WorkloadSpec& spec, std::uint64_t step) {
  return segment_position(spec, step).segment;
}

inline bool is_shift(const WorkloadSpec& spec, std::uint64_t step) {
  return step > 0 && spec.segments.size() > 1 && segment_at(spec, step) != segment_at(spec, step - 1);
}

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Deterministic in (spec, step); random order is random-access by step.
inline const QueryTemplate& next_query(const WorkloadSpec& spec, std::uint64_t step) {
  auto [segment, offset] = segment_position(spec, step);
  const auto& templates = spec.segments[segment].templates;
  if (spec.order == StreamOrder::RoundRobin) return templates[offset % templates.size()];
  std::mt19937_64 rng(detail::splitmix64(spec.seed ^ detail::splitmix64(step)));
  std::uniform_int_distribution<std::size_t> pick(0, templates.size() - 1);
  return templates[pick(rng)];
}

inline std::vector<std::size_t> used_indexes(const QueryTemplate& query,
                                             const IndexConfiguration& config) {
  std::vector<std::size_t> used;
  for (auto c : query.benefit_set)
    if (c < config.size() && config.indexed(c)) used.push_back(c);
  return used;
}

// Union of benefit sets over a segment, or over the whole workload.
inline BitVector beneficial_columns(const std::vector<QueryTemplate>& templates, std::size_t columns) {
  BitVector bits(columns, 0);
  for (const auto& q : templates)
    for (auto c : q.benefit_set) bits.at(c) = 1;
  return bits;
}

inline BitVector beneficial_columns(const WorkloadSpec& spec, std::size_t columns) {
  BitVector bits(columns, 0);
  for (const auto& seg : spec.segments) {
    auto seg_bits = beneficial_columns(seg.templates, columns);
    for (std::size_t c = 0; c < columns; ++c) bits[c] |= seg_bits[c];
  }
  return bits;
}

// Distinct read templates across all segments, ordered by id.
inline std::vector<QueryTemplate> read_templates(const WorkloadSpec& spec) {
  std::vector<QueryTemplate> out;
  std::set<int> seen;
  for (const auto& seg : spec.segments)
    for (const auto& q : seg.templates)
      if (q.kind == QueryKind::Read && seen.insert(q.id).second) out.push_back(q);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

// Sliding window over the last H observed queries.
class UsageTracker {
 public:
  struct Record {
    int query_id;
    std::vector<std::size_t> benefit_set;
  };

  UsageTracker(std::size_t horizon, std::size_t columns) : horizon_(horizon), demand_count_(columns, 0) {
    if (horizon == 0) throw std::invalid_argument("usage horizon must be positive");
  }

  void observe(const QueryTemplate& query) {
    window_.push_back(Record{query.id, query.benefit_set});
    for (auto c : query.benefit_set) ++demand_count_.at(c);
    while (window_.size() > horizon_) {
      for (auto c : window_.front().benefit_set) --demand_count_[c];
      window_.pop_front();
    }
  }

  void clear() {
    window_.clear();
    std::fill(demand_count_.begin(), demand_count_.end(), 0);
  }

  std::size_t horizon() const { return horizon_; }
  std::size_t columns() const { return demand_count_.size(); }
  const std::deque<Record>& window() const { return window_; }

  // Columns some windowed query would benefit from, whether indexed or not.
  BitVector demand_vector() const {
    BitVector bits(demand_count_.size());
    for (std::size_t c = 0; c < bits.size(); ++c) bits[c] = demand_count_[c] > 0 ? 1 : 0;
    return bits;
  }

  bool demanded(std::size_t column) const { return demand_count_.at(column) > 0; }

  // Q vector: indexed AND used by a windowed query.
  BitVector usage_vector(const IndexConfiguration& config) const {
    return bitwise_and(demand_vector(), config.bits());
  }

 private:
  std::size_t horizon_;
  std::deque<Record> window_;
  std::vector<std::size_t> demand_count_;
};

namespace detail {

struct TpchQuery {
  int id;
  double base_cost;
  std::vector<const char*> benefits;
};

// Simulated single-stream seconds at SF 1 and the ground-truth columns each
// query's plan would use. Every benefit set draws from the six ground-truth
// columns so that their union is exactly that set.
inline const std::vector<TpchQuery>& tpch_queries() {
  static const std::vector<TpchQuery> queries{
      {1, 30, {"lineitem.l_shipdate"}},
      {2, 5, {}},
      {3, 12, {"orders.o_orderdate", "lineitem.l_shipdate"}},
      {4, 10, {"orders.o_orderdate"}},
      {5, 12, {"orders.o_orderdate"}},
      {6, 8, {"lineitem.l_shipdate"}},
      {7, 12, {"lineitem.l_shipdate"}},
      {8, 10, {"orders.o_orderdate"}},
      {9, 25, {}},
      {10, 12, {"orders.o_orderdate"}},
      {11, 4, {}},
      {12, 10, {}},
      {13, 15, {}},
      {14, 8, {"lineitem.l_shipdate"}},
      {15, 8, {"lineitem.l_shipdate"}},
      {16, 6, {"part.p_brand", "part.p_size"}},
      {17, 20, {"part.p_brand", "part.p_container"}},
      {18, 25, {}},
      {19, 12, {"part.p_brand", "part.p_container", "part.p_size"}},
      {20, 10, {}},
      {21, 30, {}},
      {22, 5, {"customer.c_acctbal"}},
  };
  return queries;
}

inline QueryTemplate make_tpch_template(const TpchQuery& q, const SchemaCatalog& catalog) {
  QueryTemplate t;
  t.id = q.id;
  t.name = "Q" + std::to_string(q.id);
  t.base_cost = q.base_cost;
  for (auto* col : q.benefits) t.benefit_set.push_back(catalog.require_ordinal(col));
  std::sort(t.benefit_set.begin(), t.benefit_set.end());
  return t;
}

inline std::vector<QueryTemplate> tpch_refresh() {
  return {QueryTemplate{101, "RF1", {}, 20.0, QueryKind::Refresh},
          QueryTemplate{102, "RF2", {}, 20.0, QueryKind::Refresh}};
}

}  // namespace detail

constexpr std::uint64_t kTpchQueryCount = 22;
constexpr std::uint64_t kDefaultShiftSegmentLength = 2000;

// All 22 read templates streamed round-robin.
inline WorkloadSpec tpch_fixed_workload(const SchemaCatalog& catalog) {
  WorkloadSpec spec;
  spec.name = "tpch-fixed";
  WorkloadSegment seg{"all", {}, kTpchQueryCount};
  for (const auto& q : detail::tpch_queries()) seg.templates.push_back(detail::make_tpch_template(q, catalog));
  spec.segments.push_back(std::move(seg));
  spec.refresh = detail::tpch_refresh();
  validate(spec, catalog.indexable_count());
  return spec;
}

// Two sets of 11 queries. The first set benefits from {c_acctbal, l_shipdate,
// o_orderdate}, the second from {p_brand, p_container, p_size}.
inline WorkloadSpec tpch_shifting_workload(const SchemaCatalog& catalog,
                                           std::uint64_t segment_length = kDefaultShiftSegmentLength) {
  static const std::set<int> first{1, 3, 4, 5, 6, 7, 8, 10, 14, 15, 22};
  WorkloadSpec spec;
  spec.name = "tpch-shifting";
  WorkloadSegment a{"date-customer", {}, segment_length};
  WorkloadSegment b{"part", {}, segment_length};
  for (const auto& q : detail::tpch_queries())
    (first.count(q.id) ? a : b).templates.push_back(detail::make_tpch_template(q, catalog));
  spec.segments.push_back(std::move(a));
  spec.segments.push_back(std::move(b));
  spec.refresh = detail::tpch_refresh();
  validate(spec, catalog.indexable_count());
  return spec;
}

// Workload file format (JSON):
//   {"name": "w", "order": "round_robin" | "uniform_random", "seed": 7,
//    "templates": [{"id": 1, "name": "Q1", "benefits": ["t.x"], "base_cost": 10,
//                   "kind": "read" | "refresh"}],
//    "segments": [{"name": "s1", "templates": [1, 2], "length": 100}]}
// Without "segments", all read templates form one segment whose length is the
// template count.
inline WorkloadSpec workload_from_json(const nlohmann::json& doc, const SchemaCatalog& catalog) {
  WorkloadSpec spec;
  spec.name = doc.value("name", std::string("custom"));
  auto order = doc.value("order", std::string("round_robin"));
  if (order == "round_robin") spec.order = StreamOrder::RoundRobin;
  else if (order == "uniform_random") spec.order = StreamOrder::UniformRandom;
  else throw std::invalid_argument("unknown workload order '" + order + "'");
  spec.seed = doc.value("seed", std::uint64_t{0});

  std::vector<QueryTemplate> reads;
  for (const auto& t : doc.at("templates")) {
    QueryTemplate q;
    q.id = t.at("id").get<int>();
    q.name = t.value("name", "Q" + std::to_string(q.id));
    q.base_cost = t.value("base_cost", 1.0);
    auto kind = t.value("kind", std::string("read"));
    if (kind == "read") q.kind = QueryKind::Read;
    else if (kind == "refresh") q.kind = QueryKind::Refresh;
    else throw std::invalid_argument("unknown query kind '" + kind + "'");
    for (const auto& col : t.value("benefits", std::vector<std::string>{}))
      q.benefit_set.push_back(catalog.require_ordinal(col));
    std::sort(q.benefit_set.begin(), q.benefit_set.end());
    q.benefit_set.erase(std::unique(q.benefit_set.begin(), q.benefit_set.end()), q.benefit_set.end());
    (q.kind == QueryKind::Read ? reads : spec.refresh).push_back(std::move(q));
  }

  auto find = [&](int id) -> const QueryTemplate& {
    for (const auto& q : reads)
      if (q.id == id) return q;
    throw std::invalid_argument("segment references unknown read template " + std::to_string(id));
  };
  if (doc.contains("segments")) {
    for (const auto& s : doc.at("segments")) {
      WorkloadSegment seg;
      seg.name = s.value("name", std::string("segment"));
      for (int id : s.at("templates").get<std::vector<int>>()) seg.templates.push_back(find(id));
      seg.length = s.value("length", static_cast<std::uint64_t>(seg.templates.size()));
      spec.segments.push_back(std::move(seg));
    }
  } else {
    spec.segments.push_back(WorkloadSegment{"all", reads, reads.size()});
  }
  validate(spec, catalog.indexable_count());
  return spec;
}

inline WorkloadSpec load_workload(const std::string& path, const SchemaCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open workload file " + path);
  try {
    return workload_from_json(nlohmann::json::parse(in), catalog);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed workload file " + path + ": " + e.what());
  }
}

}  // namespace autoindex
