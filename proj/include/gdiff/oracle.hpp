#pragma once

#include <cstdint>
#include <variant>

#include "gdiff/instances.hpp"

namespace gdiff {

/// Reference solution used for labels and gap computation.
struct OracleReport {
  std::variant<Tour, IndependentSet> solution;
  bool exact = false;
  double seconds = 0.0;

  const Tour& tour() const { return std::get<Tour>(solution); }
  const IndependentSet& independent_set() const { return std::get<IndependentSet>(solution); }
};

inline constexpr int kMaxExactTspNodes = 20;
inline constexpr int kMaxExactMisNodes = 60;

/// Held-Karp bitmask DP. Refuses n > kMaxExactTspNodes.
OracleReport solve_tsp_exact(const TspInstance& instance);

/// Best of `restarts` nearest-neighbour tours, each taken to a 2-opt local optimum.
OracleReport solve_tsp_heuristic(const TspInstance& instance, int restarts, std::uint64_t seed);

/// Branch and bound with a greedy clique-cover bound. Refuses n > kMaxExactMisNodes.
OracleReport solve_mis_exact(const MisInstance& instance);

/// Minimum-degree greedy; ties broken by a seeded random priority.
OracleReport solve_mis_heuristic(const MisInstance& instance, std::uint64_t seed);

/// Exact when within the size cap, heuristic otherwise.
OracleReport label_tsp(const TspInstance& instance, int restarts, std::uint64_t seed);
OracleReport label_mis(const MisInstance& instance, std::uint64_t seed);

}  // namespace gdiff
