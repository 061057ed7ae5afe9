#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace gdiff {

enum class Task { Tsp, Mis };
enum class Branch { Discrete, Continuous };

using Rng = std::mt19937_64;

/// Seed for an independent sub-stream, derived from a root seed and a
/// stream tag with the splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

/// Uniform double in [0, 1) using the top 53 bits of one draw.
double uniform01(Rng& rng);

std::string_view to_string(Task task);
std::string_view to_string(Branch branch);
Task parse_task(std::string_view text);
Branch parse_branch(std::string_view text);

/// Shortest decimal form that round-trips.
std::string format_double(double value);

}  // namespace gdiff
