#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gdiff/common.hpp"
#include "gdiff/instances.hpp"
#include "gdiff/kernels.hpp"

namespace gdiff {

/// Message-passing view of one instance. Every undirected edge appears in both
/// orientations; directed edges are sorted by (src, dst). TSP variables are the
/// directed edges, MIS variables are the nodes.
struct ProblemGraph {
  Task task = Task::Tsp;
  int num_nodes = 0;
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<int> reverse;            // index of (dst, src)
  std::vector<double> edge_length;     // TSP only
  std::vector<Point> coords;           // TSP only

  int num_edges() const { return static_cast<int>(src.size()); }
  int num_variables() const { return task == Task::Tsp ? num_edges() : num_nodes; }
  /// Directed edge index of (u, v), or -1.
  int find_edge(int u, int v) const;
};

ProblemGraph make_tsp_graph(const TspInstance& instance, const SparseGraph& sparse);
ProblemGraph make_mis_graph(const MisInstance& instance);

/// One bit per directed edge: set iff the tour uses that edge (either direction).
std::vector<std::uint8_t> tsp_label_bits(const ProblemGraph& graph, const Tour& tour);
std::vector<std::uint8_t> mis_label_bits(int num_nodes, const IndependentSet& set);

/// Disjoint union of several graphs, one diffusion timestep per member graph.
struct GraphBatch {
  Task task = Task::Tsp;
  int num_nodes = 0;
  int num_graphs = 0;
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<double> edge_length;
  std::vector<Point> coords;
  std::vector<int> node_graph;
  std::vector<int> edge_graph;
  std::vector<int> node_offset;  // num_graphs + 1
  std::vector<int> edge_offset;  // num_graphs + 1
  std::vector<int> timesteps;    // per graph
  kernels::Csr by_src;
  kernels::Csr by_dst;

  int num_edges() const { return static_cast<int>(src.size()); }
  int num_variables() const { return task == Task::Tsp ? num_edges() : num_nodes; }
  int variable_offset(int g) const { return task == Task::Tsp ? edge_offset[g] : node_offset[g]; }
};

GraphBatch make_batch(std::span<const ProblemGraph* const> graphs, std::span<const int> timesteps);
GraphBatch make_batch(const ProblemGraph& graph, int timestep);

}  // namespace gdiff
