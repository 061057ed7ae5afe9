#pragma once

// Independent reference implementations shared by the unit tests. They are
// deliberately naive so they are easy to trust.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "gdiff/instances.hpp"

namespace testing {

inline double brute_force_tsp(const gdiff::TspInstance& inst) {
  std::vector<int> rest(inst.n - 1);
  std::iota(rest.begin(), rest.end(), 1);
  double best = std::numeric_limits<double>::infinity();
  do {
    std::vector<int> order{0};
    order.insert(order.end(), rest.begin(), rest.end());
    best = std::min(best, gdiff::tour_length(inst.coords, order));
  } while (std::next_permutation(rest.begin(), rest.end()));
  return best;
}

inline int brute_force_mis(const gdiff::MisInstance& inst) {
  std::vector<std::uint32_t> nbr(inst.n, 0);
  for (auto [u, v] : inst.edges) {
    nbr[u] |= 1u << v;
    nbr[v] |= 1u << u;
  }
  int best = 0;
  for (std::uint32_t mask = 0; mask < (1u << inst.n); ++mask) {
    bool ok = true;
    for (int v = 0; v < inst.n && ok; ++v)
      if ((mask >> v & 1u) && (nbr[v] & mask)) ok = false;
    if (ok) best = std::max(best, __builtin_popcount(mask));
  }
  return best;
}

inline std::vector<int> random_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

/// Fresh path under the system temp directory; removed on destruction.
class TempPath {
 public:
  explicit TempPath(const std::string& stem) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gdiff_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + stem);
  }
  ~TempPath() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
