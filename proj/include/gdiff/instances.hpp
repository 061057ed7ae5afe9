#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gdiff {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

double distance(const Point& a, const Point& b);

/// Undirected weighted edge, always stored with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  double weight = 0.0;
  bool operator==(const Edge&) const = default;
};

/// Cyclic node permutation. `length` includes the closing edge.
struct Tour {
  std::vector<int> order;
  double length = 0.0;
  bool operator==(const Tour&) const = default;
};

struct IndependentSet {
  std::vector<int> nodes;  // sorted ascending
  std::size_t size() const { return nodes.size(); }
  bool operator==(const IndependentSet&) const = default;
};

struct TspInstance {
  int n = 0;
  std::vector<Point> coords;
  std::vector<Edge> edges;  // dense: every unordered pair, lexicographic
  std::string id;
  std::optional<Tour> label;
  bool operator==(const TspInstance&) const = default;
};

struct MisInstance {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // u < v, sorted, unique
  std::string id;
  std::optional<IndependentSet> label;
  bool operator==(const MisInstance&) const = default;

  std::vector<std::vector<int>> adjacency() const;
};

struct Neighbor {
  int node = 0;
  double weight = 0.0;
};

/// k-nearest-neighbour candidate graph, symmetrized by union.
struct SparseGraph {
  int n = 0;
  int k = 0;
  std::vector<Edge> edges;                      // u < v, lexicographic
  std::vector<std::vector<Neighbor>> neighbors;  // sorted by node index
};

using Instance = std::variant<TspInstance, MisInstance>;

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

TspInstance make_tsp_instance(std::vector<Point> coords, std::string id = {});
MisInstance make_mis_instance(int n, std::vector<std::pair<int, int>> edges,
                              std::string id = {});

TspInstance generate_tsp(int n, std::uint64_t seed);
MisInstance generate_er(int n_min, int n_max, double p, std::uint64_t seed);

SparseGraph sparsify(const TspInstance& instance, int k);
SparseGraph dense_graph(const TspInstance& instance);

double tour_length(std::span<const Point> coords, std::span<const int> order);
Tour make_tour(std::span<const Point> coords, std::vector<int> order);

/// Rotates to start at node 0 and orients toward the smaller neighbour.
Tour canonical_tour(const Tour& tour);

bool is_valid_tour(int n, std::span<const int> order);
bool is_independent_set(const MisInstance& instance, std::span<const int> nodes);
bool is_maximal_independent_set(const MisInstance& instance, std::span<const int> nodes);

/// Line format:
///   tsp <n> <x1> <y1> ... <xn> <yn> [sol <i1> ... <in>]
///   mis <n> <m> <u1> <v1> ... <um> <vm> [sol <i1> ... <ik>]
std::string format_instance(const Instance& instance);
Instance parse_instance_line(const std::string& line, int line_number);

void save_instances(const std::filesystem::path& path, std::span<const Instance> instances);
std::vector<Instance> load_instances(const std::filesystem::path& path);

std::vector<TspInstance> load_tsp_instances(const std::filesystem::path& path);
std::vector<MisInstance> load_mis_instances(const std::filesystem::path& path);

}  // namespace gdiff
