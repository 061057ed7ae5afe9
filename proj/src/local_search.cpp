#include "gdiff/local_search.hpp"

#include <algorithm>
#include <stdexcept>

namespace gdiff {

double two_opt_delta(const TspInstance& instance, const std::vector<int>& order, int i, int j) {
  const int n = static_cast<int>(order.size());
  const Point& a = instance.coords[order[i]];
  const Point& b = instance.coords[order[i + 1]];
  const Point& c = instance.coords[order[j]];
  const Point& d = instance.coords[order[(j + 1) % n]];
  return distance(a, c) + distance(b, d) - distance(a, b) - distance(c, d);
}

Tour two_opt(Tour tour, const TspInstance& instance, int max_passes) {
  if (!is_valid_tour(instance.n, tour.order)) throw std::invalid_argument("two_opt: infeasible input tour");
  const int n = instance.n;
  constexpr double kMinGain = 1e-12;
  auto& order = tour.order;
  for (int pass = 0; pass < max_passes; ++pass) {
    double best = -kMinGain;
    int best_i = -1;
    int best_j = -1;
    for (int i = 0; i + 2 < n; ++i) {
      // i == 0 with j == n-1 would touch the same closing edge twice.
      const int j_end = (i == 0) ? n - 1 : n;
      for (int j = i + 2; j < j_end; ++j) {
        const double delta = two_opt_delta(instance, order, i, j);
        if (delta < best) {
          best = delta;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (best_i < 0) break;
    std::reverse(order.begin() + best_i + 1, order.begin() + best_j + 1);
  }
  tour.length = tour_length(instance.coords, order);
  return tour;
}

}  // namespace gdiff
