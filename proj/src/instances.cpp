#include "gdiff/instances.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "gdiff/common.hpp"

namespace gdiff {

double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

ParseError::ParseError(int line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

std::vector<std::vector<int>> MisInstance::adjacency() const {
  std::vector<std::vector<int>> adj(n);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

TspInstance make_tsp_instance(std::vector<Point> coords, std::string id) {
  TspInstance inst;
  inst.n = static_cast<int>(coords.size());
  if (inst.n < 2) throw std::invalid_argument("a TSP instance needs at least 2 nodes");
  inst.coords = std::move(coords);
  inst.id = std::move(id);
  inst.edges.reserve(static_cast<std::size_t>(inst.n) * (inst.n - 1) / 2);
  for (int u = 0; u < inst.n; ++u)
    for (int v = u + 1; v < inst.n; ++v)
      inst.edges.push_back({u, v, distance(inst.coords[u], inst.coords[v])});
  return inst;
}

MisInstance make_mis_instance(int n, std::vector<std::pair<int, int>> edges, std::string id) {
  if (n < 1) throw std::invalid_argument("a MIS instance needs at least 1 node");
  for (auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw std::invalid_argument("edge endpoint out of range");
    if (u == v) throw std::invalid_argument("self-loop in MIS instance");
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  MisInstance inst;
  inst.n = n;
  inst.edges = std::move(edges);
  inst.id = std::move(id);
  return inst;
}

TspInstance generate_tsp(int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate_tsp: n must be >= 2");
  Rng rng(seed);
  std::vector<Point> coords(n);
  for (auto& p : coords) {
    p.x = uniform01(rng);
    p.y = uniform01(rng);
  }
  return make_tsp_instance(std::move(coords));
}

MisInstance generate_er(int n_min, int n_max, double p, std::uint64_t seed) {
  if (n_min < 2 || n_max < n_min)
    throw std::invalid_argument("generate_er: need 2 <= n_min <= n_max");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("generate_er: p must lie in [0, 1]");
  Rng rng(seed);
  const int n = n_min + static_cast<int>(rng() % static_cast<std::uint64_t>(n_max - n_min + 1));
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (uniform01(rng) < p) edges.emplace_back(u, v);
  return make_mis_instance(n, std::move(edges));
}

SparseGraph sparsify(const TspInstance& instance, int k) {
  const int n = instance.n;
  if (k < 1 || k >= n) throw std::invalid_argument("sparsify: k must satisfy 1 <= k < n");
  std::vector<std::pair<int, int>> kept;
  kept.reserve(static_cast<std::size_t>(n) * k);
  std::vector<int> order;
  for (int i = 0; i < n; ++i) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    order.erase(order.begin() + i);
    auto closer = [&](int a, int b) {
      const double da = distance(instance.coords[i], instance.coords[a]);
      const double db = distance(instance.coords[i], instance.coords[b]);
      return da < db || (da == db && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
    for (int r = 0; r < k; ++r) kept.emplace_back(std::min(i, order[r]), std::max(i, order[r]));
  }
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());

  SparseGraph g;
  g.n = n;
  g.k = k;
  g.neighbors.resize(n);
  g.edges.reserve(kept.size());
  for (auto [u, v] : kept) {
    const double w = distance(instance.coords[u], instance.coords[v]);
    g.edges.push_back({u, v, w});
    g.neighbors[u].push_back({v, w});
    g.neighbors[v].push_back({u, w});
  }
  for (auto& list : g.neighbors)
    std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
  return g;
}

SparseGraph dense_graph(const TspInstance& instance) { return sparsify(instance, instance.n - 1); }

double tour_length(std::span<const Point> coords, std::span<const int> order) {
  double total = 0.0;
  const std::size_t n = order.size();
  for (std::size_t i = 0; i < n; ++i) total += distance(coords[order[i]], coords[order[(i + 1) % n]]);
  return total;
}

Tour make_tour(std::span<const Point> coords, std::vector<int> order) {
  Tour t;
  t.length = tour_length(coords, order);
  t.order = std::move(order);
  return t;
}

Tour canonical_tour(const Tour& tour) {
  const auto& o = tour.order;
  const std::size_t n = o.size();
  if (n == 0) return tour;
  const std::size_t start = static_cast<std::size_t>(std::find(o.begin(), o.end(), 0) - o.begin());
  const int next = o[(start + 1) % n];
  const int prev = o[(start + n - 1) % n];
  Tour out;
  out.length = tour.length;
  out.order.reserve(n);
  const bool forward = next <= prev;
  for (std::size_t s = 0; s < n; ++s)
    out.order.push_back(forward ? o[(start + s) % n] : o[(start + n - s) % n]);
  return out;
}

bool is_valid_tour(int n, std::span<const int> order) {
  if (static_cast<int>(order.size()) != n) return false;
  std::vector<char> seen(n, 0);
  for (int v : order) {
    if (v < 0 || v >= n || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

bool is_independent_set(const MisInstance& instance, std::span<const int> nodes) {
  std::vector<char> in(instance.n, 0);
  for (int v : nodes) {
    if (v < 0 || v >= instance.n || in[v]) return false;
    in[v] = 1;
  }
  for (auto [u, v] : instance.edges)
    if (in[u] && in[v]) return false;
  return true;
}

bool is_maximal_independent_set(const MisInstance& instance, std::span<const int> nodes) {
  if (!is_independent_set(instance, nodes)) return false;
  std::vector<char> blocked(instance.n, 0);
  for (int v : nodes) blocked[v] = 1;
  for (auto [u, v] : instance.edges) {
    if (std::find(nodes.begin(), nodes.end(), u) != nodes.end()) blocked[v] = 1;
    if (std::find(nodes.begin(), nodes.end(), v) != nodes.end()) blocked[u] = 1;
  }
  return std::all_of(blocked.begin(), blocked.end(), [](char b) { return b != 0; });
}

namespace {

void append_double(std::string& out, double value) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, res.ptr);
}

class TokenReader {
 public:
  TokenReader(const std::string& line, int line_number) : line_number_(line_number) {
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) tokens_.push_back(tok);
  }

  bool done() const { return pos_ >= tokens_.size(); }
  const std::string& peek() const { return tokens_[pos_]; }

  std::string word() {
    if (done()) fail("unexpected end of line");
    return tokens_[pos_++];
  }

  long long integer() {
    const std::string tok = word();
    long long value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("expected integer, got '" + tok + "'");
    return value;
  }

  double real() {
    const std::string tok = word();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(value))
      fail("expected number, got '" + tok + "'");
    return value;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_number_, what); }

 private:
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
  int line_number_;
};

std::vector<int> read_solution(TokenReader& in, int n) {
  std::vector<int> sol;
  while (!in.done()) {
    const long long v = in.integer();
    if (v < 0 || v >= n) in.fail("solution index out of range");
    sol.push_back(static_cast<int>(v));
  }
  return sol;
}

}  // namespace

std::string format_instance(const Instance& instance) {
  std::string out;
  if (const auto* tsp = std::get_if<TspInstance>(&instance)) {
    out += "tsp " + std::to_string(tsp->n);
    for (const auto& p : tsp->coords) {
      out += ' ';
      append_double(out, p.x);
      out += ' ';
      append_double(out, p.y);
    }
    if (tsp->label) {
      out += " sol";
      for (int v : tsp->label->order) out += ' ' + std::to_string(v);
    }
  } else {
    const auto& mis = std::get<MisInstance>(instance);
    out += "mis " + std::to_string(mis.n) + ' ' + std::to_string(mis.edges.size());
    for (auto [u, v] : mis.edges) out += ' ' + std::to_string(u) + ' ' + std::to_string(v);
    if (mis.label) {
      out += " sol";
      for (int v : mis.label->nodes) out += ' ' + std::to_string(v);
    }
  }
  return out;
}

Instance parse_instance_line(const std::string& line, int line_number) {
  TokenReader in(line, line_number);
  const std::string kind = in.word();
  if (kind == "tsp") {
    const long long n = in.integer();
    if (n < 2) in.fail("tsp node count must be >= 2");
    std::vector<Point> coords(static_cast<std::size_t>(n));
    for (auto& p : coords) {
      p.x = in.real();
      p.y = in.real();
      if (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0) in.fail("coordinate outside the unit square");
    }
    TspInstance inst = make_tsp_instance(std::move(coords));
    if (!in.done()) {
      if (in.word() != "sol") in.fail("expected 'sol' or end of line");
      std::vector<int> order = read_solution(in, static_cast<int>(n));
      if (!is_valid_tour(static_cast<int>(n), order)) in.fail("label is not a permutation of the nodes");
      inst.label = make_tour(inst.coords, std::move(order));
    }
    return inst;
  }
  if (kind == "mis") {
    const long long n = in.integer();
    const long long m = in.integer();
    if (n < 1) in.fail("mis node count must be >= 1");
    if (m < 0) in.fail("negative edge count");
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<std::size_t>(m));
    for (long long e = 0; e < m; ++e) {
      const long long u = in.integer();
      const long long v = in.integer();
      if (u < 0 || v < 0 || u >= n || v >= n) in.fail("edge endpoint out of range");
      if (u == v) in.fail("self-loop");
      edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
    MisInstance inst = make_mis_instance(static_cast<int>(n), std::move(edges));
    if (!in.done()) {
      if (in.word() != "sol") in.fail("expected 'sol' or end of line");
      std::vector<int> nodes = read_solution(in, static_cast<int>(n));
      std::sort(nodes.begin(), nodes.end());
      if (!is_independent_set(inst, nodes)) in.fail("label is not an independent set");
      inst.label = IndependentSet{std::move(nodes)};
    }
    return inst;
  }
  in.fail("unknown instance kind '" + kind + "'");
}

void save_instances(const std::filesystem::path& path, std::span<const Instance> instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& inst : instances) out << format_instance(inst) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Instance> load_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Instance> result;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Instance inst = parse_instance_line(line, line_number);
    const std::string id = std::to_string(result.size());
    std::visit([&](auto& i) { i.id = id; }, inst);
    result.push_back(std::move(inst));
  }
  return result;
}

std::vector<TspInstance> load_tsp_instances(const std::filesystem::path& path) {
  std::vector<TspInstance> out;
  for (auto& inst : load_instances(path)) {
    auto* tsp = std::get_if<TspInstance>(&inst);
    if (!tsp) throw std::runtime_error(path.string() + ": expected only tsp instances");
    out.push_back(std::move(*tsp));
  }
  return out;
}

std::vector<MisInstance> load_mis_instances(const std::filesystem::path& path) {
  std::vector<MisInstance> out;
  for (auto& inst : load_instances(path)) {
    auto* mis = std::get_if<MisInstance>(&inst);
    if (!mis) throw std::runtime_error(path.string() + ": expected only mis instances");
    out.push_back(std::move(*mis));
  }
  return out;
}

}  // namespace gdiff
