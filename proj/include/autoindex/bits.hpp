#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace autoindex {

// One byte per bit. Vectors here are short (2C <= a few hundred) and are
// copied into Eigen matrices and hashed far more often than they are stored.
using BitVector = std::vector<std::uint8_t>;

inline std::size_t popcount(const BitVector& bits) {
  return static_cast<std::size_t>(
      std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

inline BitVector bitwise_and(const BitVector& a, const BitVector& b) {
  BitVector out(std::min(a.size(), b.size()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

inline std::string to_string(const BitVector& bits) {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

}  // namespace autoindex
