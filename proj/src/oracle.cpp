#include "gdiff/oracle.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "gdiff/common.hpp"
#include "gdiff/local_search.hpp"

namespace gdiff {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<int> nearest_neighbor_order(const TspInstance& inst, int start) {
  const int n = inst.n;
  std::vector<char> visited(n, 0);
  std::vector<int> order;
  order.reserve(n);
  int cur = start;
  visited[cur] = 1;
  order.push_back(cur);
  for (int step = 1; step < n; ++step) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int v = 0; v < n; ++v) {
      if (visited[v]) continue;
      const double d = distance(inst.coords[cur], inst.coords[v]);
      if (d < best_d) {
        best_d = d;
        best = v;
      }
    }
    visited[best] = 1;
    order.push_back(best);
    cur = best;
  }
  return order;
}

using Mask = std::uint64_t;

class MisBranchAndBound {
 public:
  explicit MisBranchAndBound(const MisInstance& inst) : n_(inst.n), nbr_(inst.n, 0) {
    for (auto [u, v] : inst.edges) {
      nbr_[u] |= Mask{1} << v;
      nbr_[v] |= Mask{1} << u;
    }
  }

  Mask solve(Mask initial_best) {
    best_ = initial_best;
    best_size_ = std::popcount(initial_best);
    const Mask all = n_ == 64 ? ~Mask{0} : ((Mask{1} << n_) - 1);
    search(all, 0);
    return best_;
  }

 private:
  int clique_cover_bound(Mask cand) const {
    // Greedy partition of the candidate set into cliques; an independent set
    // takes at most one vertex from each.
    int cliques = 0;
    while (cand) {
      const int v = std::countr_zero(cand);
      Mask clique = Mask{1} << v;
      Mask common = nbr_[v] & cand;
      cand &= ~clique;
      while (common) {
        const int w = std::countr_zero(common);
        clique |= Mask{1} << w;
        common &= nbr_[w];
        common &= ~(Mask{1} << w);
      }
      cand &= ~clique;
      ++cliques;
    }
    return cliques;
  }

  void search(Mask cand, Mask chosen) {
    // Vertices of degree <= 1 in the candidate graph belong to some maximum set.
    bool reduced = true;
    while (reduced && cand) {
      reduced = false;
      for (Mask rest = cand; rest;) {
        const int v = std::countr_zero(rest);
        rest &= rest - 1;
        if (!(cand >> v & 1)) continue;
        if (std::popcount(nbr_[v] & cand) <= 1) {
          chosen |= Mask{1} << v;
          cand &= ~((Mask{1} << v) | nbr_[v]);
          reduced = true;
        }
      }
    }
    const int cur = std::popcount(chosen);
    if (!cand) {
      if (cur > best_size_) {
        best_size_ = cur;
        best_ = chosen;
      }
      return;
    }
    if (cur + clique_cover_bound(cand) <= best_size_) return;

    int pivot = -1;
    int pivot_deg = -1;
    for (Mask rest = cand; rest; rest &= rest - 1) {
      const int v = std::countr_zero(rest);
      const int deg = std::popcount(nbr_[v] & cand);
      if (deg > pivot_deg) {
        pivot_deg = deg;
        pivot = v;
      }
    }
    const Mask bit = Mask{1} << pivot;
    search(cand & ~(bit | nbr_[pivot]), chosen | bit);
    search(cand & ~bit, chosen);
  }

  int n_;
  std::vector<Mask> nbr_;
  Mask best_ = 0;
  int best_size_ = 0;
};

}  // namespace

OracleReport solve_tsp_exact(const TspInstance& inst) {
  const int n = inst.n;
  if (n > kMaxExactTspNodes)
    throw std::invalid_argument("solve_tsp_exact: n = " + std::to_string(n) + " exceeds the exact cap of " +
                                std::to_string(kMaxExactTspNodes) + "; use solve_tsp_heuristic");
  if (n < 2) throw std::invalid_argument("solve_tsp_exact: n must be >= 2");
  const auto start = Clock::now();
  // Node 0 is the fixed start; bit b of the mask stands for node b + 1.
  const int m = n - 1;
  const std::size_t masks = std::size_t{1} << m;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(masks * m, kInf);
  std::vector<std::int8_t> parent(masks * m, -1);
  auto d = [&](int a, int b) { return distance(inst.coords[a], inst.coords[b]); };
  for (int j = 0; j < m; ++j) cost[(std::size_t{1} << j) * m + j] = d(0, j + 1);
  for (std::size_t mask = 1; mask < masks; ++mask) {
    for (int j = 0; j < m; ++j) {
      if (!(mask >> j & 1)) continue;
      const double base = cost[mask * m + j];
      if (base == kInf) continue;
      for (int k = 0; k < m; ++k) {
        if (mask >> k & 1) continue;
        const std::size_t next = mask | (std::size_t{1} << k);
        const double c = base + d(j + 1, k + 1);
        if (c < cost[next * m + k]) {
          cost[next * m + k] = c;
          parent[next * m + k] = static_cast<std::int8_t>(j);
        }
      }
    }
  }
  const std::size_t full = masks - 1;
  int last = 0;
  double best = kInf;
  for (int j = 0; j < m; ++j) {
    const double c = cost[full * m + j] + d(j + 1, 0);
    if (c < best) {
      best = c;
      last = j;
    }
  }
  std::vector<int> order;
  std::size_t mask = full;
  int cur = last;
  while (cur >= 0) {
    order.push_back(cur + 1);
    const int prev = parent[mask * m + cur];
    mask &= ~(std::size_t{1} << cur);
    cur = prev;
  }
  order.push_back(0);
  std::reverse(order.begin(), order.end());

  OracleReport report;
  report.solution = canonical_tour(make_tour(inst.coords, std::move(order)));
  report.exact = true;
  report.seconds = seconds_since(start);
  return report;
}

OracleReport solve_tsp_heuristic(const TspInstance& inst, int restarts, std::uint64_t seed) {
  if (inst.n < 2) throw std::invalid_argument("solve_tsp_heuristic: n must be >= 2");
  if (restarts < 1) throw std::invalid_argument("solve_tsp_heuristic: restarts must be >= 1");
  const auto start = Clock::now();
  Rng rng(seed);
  std::vector<int> starts(inst.n);
  std::iota(starts.begin(), starts.end(), 0);
  std::shuffle(starts.begin(), starts.end(), rng);
  Tour best;
  best.length = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    const int s = starts[static_cast<std::size_t>(r) % starts.size()];
    Tour t = make_tour(inst.coords, nearest_neighbor_order(inst, s));
    t = two_opt(std::move(t), inst, std::numeric_limits<int>::max());
    if (t.length < best.length) best = std::move(t);
  }
  OracleReport report;
  report.solution = canonical_tour(best);
  report.exact = false;
  report.seconds = seconds_since(start);
  return report;
}

OracleReport solve_mis_heuristic(const MisInstance& inst, std::uint64_t seed) {
  const auto start = Clock::now();
  const auto adj = inst.adjacency();
  Rng rng(seed);
  std::vector<std::uint64_t> priority(inst.n);
  for (auto& p : priority) p = rng();
  std::vector<int> degree(inst.n);
  std::vector<char> alive(inst.n, 1);
  for (int v = 0; v < inst.n; ++v) degree[v] = static_cast<int>(adj[v].size());
  std::vector<int> chosen;
  for (;;) {
    int pick = -1;
    for (int v = 0; v < inst.n; ++v) {
      if (!alive[v]) continue;
      if (pick < 0 || degree[v] < degree[pick] || (degree[v] == degree[pick] && priority[v] < priority[pick]))
        pick = v;
    }
    if (pick < 0) break;
    chosen.push_back(pick);
    std::vector<int> removed{pick};
    for (int w : adj[pick])
      if (alive[w]) removed.push_back(w);
    for (int r : removed) alive[r] = 0;
    for (int r : removed)
      for (int w : adj[r])
        if (alive[w]) --degree[w];
  }
  std::sort(chosen.begin(), chosen.end());
  OracleReport report;
  report.solution = IndependentSet{std::move(chosen)};
  report.exact = false;
  report.seconds = seconds_since(start);
  return report;
}

OracleReport solve_mis_exact(const MisInstance& inst) {
  if (inst.n > kMaxExactMisNodes)
    throw std::invalid_argument("solve_mis_exact: n = " + std::to_string(inst.n) + " exceeds the exact cap of " +
                                std::to_string(kMaxExactMisNodes) + "; use solve_mis_heuristic");
  const auto start = Clock::now();
  Mask initial = 0;
  const OracleReport greedy = solve_mis_heuristic(inst, 0);
  for (int v : greedy.independent_set().nodes) initial |= Mask{1} << v;
  MisBranchAndBound bb(inst);
  const Mask best = bb.solve(initial);
  std::vector<int> nodes;
  for (int v = 0; v < inst.n; ++v)
    if (best >> v & 1) nodes.push_back(v);
  OracleReport report;
  report.solution = IndependentSet{std::move(nodes)};
  report.exact = true;
  report.seconds = seconds_since(start);
  return report;
}

OracleReport label_tsp(const TspInstance& inst, int restarts, std::uint64_t seed) {
  return inst.n <= kMaxExactTspNodes ? solve_tsp_exact(inst) : solve_tsp_heuristic(inst, restarts, seed);
}

OracleReport label_mis(const MisInstance& inst, std::uint64_t seed) {
  return inst.n <= kMaxExactMisNodes ? solve_mis_exact(inst) : solve_mis_heuristic(inst, seed);
}

}  // namespace gdiff
