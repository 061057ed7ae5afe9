#include "gdiff/common.hpp"

#include <charconv>
#include <stdexcept>

namespace gdiff {

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string_view to_string(Task task) {
  return task == Task::Tsp ? "tsp" : "mis";
}

std::string_view to_string(Branch branch) {
  return branch == Branch::Discrete ? "discrete" : "continuous";
}

Task parse_task(std::string_view text) {
  if (text == "tsp") return Task::Tsp;
  if (text == "mis") return Task::Mis;
  throw std::invalid_argument("unknown task '" + std::string(text) + "' (expected tsp or mis)");
}

Branch parse_branch(std::string_view text) {
  if (text == "discrete") return Branch::Discrete;
  if (text == "continuous") return Branch::Continuous;
  throw std::invalid_argument("unknown branch '" + std::string(text) +
                              "' (expected discrete or continuous)");
}

std::string format_double(double value) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

}  // namespace gdiff
