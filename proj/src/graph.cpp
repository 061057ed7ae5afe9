#include "gdiff/graph.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace gdiff {
namespace {

void finish_graph(ProblemGraph& g, std::vector<std::pair<int, int>> directed) {
  std::sort(directed.begin(), directed.end());
  g.src.resize(directed.size());
  g.dst.resize(directed.size());
  for (std::size_t k = 0; k < directed.size(); ++k) {
    g.src[k] = directed[k].first;
    g.dst[k] = directed[k].second;
  }
  g.reverse.resize(directed.size());
  for (std::size_t k = 0; k < directed.size(); ++k) g.reverse[k] = g.find_edge(g.dst[k], g.src[k]);
}

kernels::Csr group_edges(int num_nodes, std::span<const int> key) {
  kernels::Csr csr;
  csr.offsets.assign(num_nodes + 1, 0);
  for (int v : key) ++csr.offsets[v + 1];
  std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
  csr.items.resize(key.size());
  std::vector<int> fill(csr.offsets.begin(), csr.offsets.end() - 1);
  for (std::size_t k = 0; k < key.size(); ++k) csr.items[fill[key[k]]++] = static_cast<int>(k);
  return csr;
}

}  // namespace

int ProblemGraph::find_edge(int u, int v) const {
  auto first = std::lower_bound(src.begin(), src.end(), u);
  auto last = std::upper_bound(first, src.end(), u);
  const auto begin = static_cast<std::size_t>(first - src.begin());
  const auto end = static_cast<std::size_t>(last - src.begin());
  auto it = std::lower_bound(dst.begin() + begin, dst.begin() + end, v);
  if (it == dst.begin() + end || *it != v) return -1;
  return static_cast<int>(it - dst.begin());
}

ProblemGraph make_tsp_graph(const TspInstance& instance, const SparseGraph& sparse) {
  if (sparse.n != instance.n) throw std::invalid_argument("make_tsp_graph: sparse graph does not match instance");
  ProblemGraph g;
  g.task = Task::Tsp;
  g.num_nodes = instance.n;
  g.coords = instance.coords;
  std::vector<std::pair<int, int>> directed;
  directed.reserve(sparse.edges.size() * 2);
  for (const auto& e : sparse.edges) {
    directed.emplace_back(e.u, e.v);
    directed.emplace_back(e.v, e.u);
  }
  finish_graph(g, std::move(directed));
  g.edge_length.resize(g.src.size());
  for (std::size_t k = 0; k < g.src.size(); ++k)
    g.edge_length[k] = distance(instance.coords[g.src[k]], instance.coords[g.dst[k]]);
  return g;
}

ProblemGraph make_mis_graph(const MisInstance& instance) {
  ProblemGraph g;
  g.task = Task::Mis;
  g.num_nodes = instance.n;
  std::vector<std::pair<int, int>> directed;
  directed.reserve(instance.edges.size() * 2);
  for (auto [u, v] : instance.edges) {
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  finish_graph(g, std::move(directed));
  return g;
}

std::vector<std::uint8_t> tsp_label_bits(const ProblemGraph& graph, const Tour& tour) {
  std::vector<std::uint8_t> bits(graph.num_edges(), 0);
  const std::size_t n = tour.order.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int u = tour.order[i];
    const int v = tour.order[(i + 1) % n];
    // Edges pruned by sparsification simply have no variable.
    if (const int k = graph.find_edge(u, v); k >= 0) bits[k] = 1;
    if (const int k = graph.find_edge(v, u); k >= 0) bits[k] = 1;
  }
  return bits;
}

std::vector<std::uint8_t> mis_label_bits(int num_nodes, const IndependentSet& set) {
  std::vector<std::uint8_t> bits(num_nodes, 0);
  for (int v : set.nodes) bits.at(v) = 1;
  return bits;
}

GraphBatch make_batch(std::span<const ProblemGraph* const> graphs, std::span<const int> timesteps) {
  if (graphs.empty()) throw std::invalid_argument("make_batch: empty batch");
  if (graphs.size() != timesteps.size()) throw std::invalid_argument("make_batch: one timestep per graph required");
  GraphBatch b;
  b.task = graphs.front()->task;
  b.num_graphs = static_cast<int>(graphs.size());
  b.timesteps.assign(timesteps.begin(), timesteps.end());
  b.node_offset.push_back(0);
  b.edge_offset.push_back(0);
  for (int gi = 0; gi < b.num_graphs; ++gi) {
    const ProblemGraph& g = *graphs[gi];
    if (g.task != b.task) throw std::invalid_argument("make_batch: mixed tasks");
    const int base = b.num_nodes;
    for (int k = 0; k < g.num_edges(); ++k) {
      b.src.push_back(g.src[k] + base);
      b.dst.push_back(g.dst[k] + base);
      b.edge_graph.push_back(gi);
    }
    b.edge_length.insert(b.edge_length.end(), g.edge_length.begin(), g.edge_length.end());
    b.coords.insert(b.coords.end(), g.coords.begin(), g.coords.end());
    b.node_graph.insert(b.node_graph.end(), g.num_nodes, gi);
    b.num_nodes += g.num_nodes;
    b.node_offset.push_back(b.num_nodes);
    b.edge_offset.push_back(b.num_edges());
  }
  b.by_src = group_edges(b.num_nodes, b.src);
  b.by_dst = group_edges(b.num_nodes, b.dst);
  return b;
}

GraphBatch make_batch(const ProblemGraph& graph, int timestep) {
  const ProblemGraph* one[] = {&graph};
  const int t[] = {timestep};
  return make_batch(one, t);
}

}  // namespace gdiff
