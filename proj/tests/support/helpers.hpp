#pragma once

#include <string>
#include <vector>

#include "autoindex/catalog.hpp"
#include "autoindex/workload.hpp"

namespace testutil {

inline autoindex::QueryTemplate query(int id, std::vector<std::size_t> benefits, double cost = 1.0) {
  return autoindex::QueryTemplate{id, "Q" + std::to_string(id), std::move(benefits), cost,
                                  autoindex::QueryKind::Read};
}

inline autoindex::WorkloadSpec single_segment(std::vector<autoindex::QueryTemplate> templates,
                                              std::uint64_t length = 0) {
  autoindex::WorkloadSpec spec;
  spec.name = "test";
  const auto n = templates.size();
  spec.segments.push_back({"s", std::move(templates), length ? length : n});
  return spec;
}

inline autoindex::IndexConfiguration config(std::initializer_list<int> bits) {
  autoindex::BitVector b;
  for (int x : bits) b.push_back(static_cast<std::uint8_t>(x));
  return autoindex::IndexConfiguration(b);
}

}  // namespace testutil
