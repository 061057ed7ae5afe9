#pragma once

#include "gdiff/instances.hpp"

namespace gdiff {

inline constexpr int kDefaultTwoOptPasses = 100;

/// Best-improvement 2-opt. Each pass scans every segment reversal and applies
/// the single best strictly improving one; stops when none improves or after
/// `max_passes` moves.
Tour two_opt(Tour tour, const TspInstance& instance, int max_passes = kDefaultTwoOptPasses);

/// Length change from reversing order[i+1..j] (i < j).
double two_opt_delta(const TspInstance& instance, const std::vector<int>& order, int i, int j);

}  // namespace gdiff
