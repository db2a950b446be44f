#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace modeltalk {

// (index, value) pairs sorted by index.
using SparseVector = std::vector<std::pair<std::size_t, double>>;

inline double dot(const SparseVector& a, const SparseVector& b) {
  double total = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      total += a[i++].second * b[j++].second;
    }
  }
  return total;
}

inline double l2_norm(const SparseVector& v) {
  double total = 0.0;
  for (const auto& [i, x] : v) total += x * x;
  return std::sqrt(total);
}

}  // namespace modeltalk
