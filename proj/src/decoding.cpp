#include "gdiff/decoding.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace gdiff {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Far enough out that the softmax rounds to an exact one-hot.
constexpr double kSaturatedLogit = 1000.0;

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int v) {
    while (parent_[v] != v) v = parent_[v] = parent_[parent_[v]];
    return v;
  }
  void unite(int a, int b) { parent_[find(a)] = find(b); }

 private:
  std::vector<int> parent_;
};

}  // namespace

std::vector<double> NetworkDenoiser::predict(const GraphBatch& batch, std::span<const double> xt) const {
  return forward(params_, batch, xt, false, backend_).outputs;
}

LabelDenoiser::LabelDenoiser(Task task, Branch branch, std::vector<std::uint8_t> label, const NoiseSchedule& sched)
    : task_(task), branch_(branch), label_(std::move(label)), sched_(sched) {}

std::vector<double> LabelDenoiser::predict(const GraphBatch& batch, std::span<const double> xt) const {
  if (batch.num_graphs != 1 || batch.num_variables() != static_cast<int>(label_.size()) ||
      xt.size() != label_.size())
    throw std::invalid_argument("LabelDenoiser: batch does not match the label");
  std::vector<double> out;
  if (branch_ == Branch::Discrete) {
    out.resize(2 * label_.size());
    for (std::size_t i = 0; i < label_.size(); ++i) {
      out[2 * i] = label_[i] ? -kSaturatedLogit : kSaturatedLogit;
      out[2 * i + 1] = -out[2 * i];
    }
    return out;
  }
  const int t = batch.timesteps.front();
  const double signal = std::sqrt(sched_.alpha_bar(t));
  const double noise = std::sqrt(1.0 - sched_.alpha_bar(t));
  out.resize(label_.size());
  for (std::size_t i = 0; i < label_.size(); ++i) out[i] = (xt[i] - signal * (label_[i] ? 1.0 : -1.0)) / noise;
  return out;
}

ChainResult run_reverse_chain(const Denoiser& model, const NoiseSchedule& sched, const InferenceSchedule& inf,
                              const ProblemGraph& graph, Rng& rng, const ChainOptions& options) {
  if (model.task() != graph.task) throw std::invalid_argument("run_reverse_chain: model task does not match instance");
  if (model.diffusion_steps() != sched.steps())
    throw std::invalid_argument("run_reverse_chain: model was trained with T = " + std::to_string(model.diffusion_steps()) +
                                ", schedule has T = " + std::to_string(sched.steps()));
  if (inf.timesteps.empty() || inf.timesteps.back() != sched.steps())
    throw std::invalid_argument("run_reverse_chain: inference schedule does not end at T");
  const std::size_t n = static_cast<std::size_t>(graph.num_variables());
  GraphBatch batch = make_batch(graph, sched.steps());
  ChainResult result;
  result.heatmap.task = graph.task;
  result.heatmap.scores.resize(n);

  if (model.branch() == Branch::Discrete) {
    std::vector<std::uint8_t> xt(n);
    for (auto& b : xt) b = uniform01(rng) < 0.5 ? 1 : 0;
    std::vector<double> input(n);
    std::vector<CatRow> probs;
    for (auto [t, t_prev] : inf.hops()) {
      batch.timesteps[0] = t;
      std::copy(xt.begin(), xt.end(), input.begin());
      probs = predict_x0_probs(model.predict(batch, input), Branch::Discrete);
      const StepMode mode = t_prev == 0 ? StepMode::Argmax : options.discrete_mode;
      xt = discrete_reverse_step(xt, probs, t_prev, t, sched, rng, mode);
    }
    for (std::size_t i = 0; i < n; ++i) result.heatmap.scores[i] = probs[i][1];
    result.x0 = std::move(xt);
    return result;
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = normal(rng);
  for (auto [t, t_prev] : inf.hops()) {
    batch.timesteps[0] = t;
    const auto eps = predict_eps(model.predict(batch, x), Branch::Continuous);
    x = continuous_reverse_step(x, eps, t_prev, t, sched, options.continuous_mode, rng);
  }
  for (std::size_t i = 0; i < n; ++i) result.heatmap.scores[i] = std::clamp(0.5 * (x[i] + 1.0), 0.0, 1.0);
  result.x0 = quantize(x);
  return result;
}

Tour tsp_greedy_decode(const Heatmap& heatmap, const TspInstance& instance, const ProblemGraph& graph) {
  const int n = instance.n;
  if (heatmap.scores.size() != static_cast<std::size_t>(graph.num_edges()))
    throw std::invalid_argument("tsp_greedy_decode: heatmap does not cover the graph");
  if (n <= 3) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    return make_tour(instance.coords, std::move(order));
  }

  struct Candidate {
    int edge;
    double ratio;
  };
  std::vector<Candidate> ranked;
  for (int k = 0; k < graph.num_edges(); ++k) {
    if (graph.src[k] > graph.dst[k]) continue;
    const double score = heatmap.scores[k] + heatmap.scores[graph.reverse[k]];
    const double d = graph.edge_length[k];
    ranked.push_back({k, d > 0.0 ? score / d : std::numeric_limits<double>::infinity()});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Candidate& a, const Candidate& b) { return a.ratio > b.ratio; });

  std::vector<std::vector<int>> adj(n);
  DisjointSets sets(n);
  int inserted = 0;
  auto link = [&](int u, int v) {
    adj[u].push_back(v);
    adj[v].push_back(u);
    sets.unite(u, v);
    ++inserted;
  };
  for (const Candidate& c : ranked) {
    const int u = graph.src[c.edge];
    const int v = graph.dst[c.edge];
    if (adj[u].size() >= 2 || adj[v].size() >= 2) continue;
    if (sets.find(u) == sets.find(v) && inserted != n - 1) continue;
    link(u, v);
    if (inserted == n) break;
  }

  // Completion: join fragments through their nearest open endpoints.
  while (inserted < n - 1) {
    int best_u = -1, best_v = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int u = 0; u < n; ++u) {
      if (adj[u].size() >= 2) continue;
      for (int v = u + 1; v < n; ++v) {
        if (adj[v].size() >= 2 || sets.find(u) == sets.find(v)) continue;
        const double d = distance(instance.coords[u], instance.coords[v]);
        if (d < best) {
          best = d;
          best_u = u;
          best_v = v;
        }
      }
    }
    link(best_u, best_v);
  }
  if (inserted == n - 1) {
    std::vector<int> ends;
    for (int v = 0; v < n; ++v)
      if (adj[v].size() < 2) ends.push_back(v);
    link(ends[0], ends[1]);
  }

  std::vector<int> order;
  order.reserve(n);
  int prev = -1, cur = 0;
  for (int i = 0; i < n; ++i) {
    order.push_back(cur);
    const int next = adj[cur][0] != prev ? adj[cur][0] : adj[cur][1];
    prev = cur;
    cur = next;
  }
  return canonical_tour(make_tour(instance.coords, std::move(order)));
}

IndependentSet mis_greedy_decode(const Heatmap& heatmap, const MisInstance& instance) {
  if (heatmap.scores.size() != static_cast<std::size_t>(instance.n))
    throw std::invalid_argument("mis_greedy_decode: heatmap does not cover the graph");
  std::vector<int> order(instance.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return heatmap.scores[a] > heatmap.scores[b]; });
  const auto adj = instance.adjacency();
  std::vector<char> blocked(instance.n, 0);
  IndependentSet set;
  for (int v : order) {
    if (blocked[v]) continue;
    set.nodes.push_back(v);
    blocked[v] = 1;
    for (int w : adj[v]) blocked[w] = 1;
  }
  std::sort(set.nodes.begin(), set.nodes.end());
  return set;
}

double objective(const Solution& solution) {
  if (const auto* tour = std::get_if<Tour>(&solution)) return tour->length;
  return static_cast<double>(std::get<IndependentSet>(solution).size());
}

bool better(const Solution& a, const Solution& b) {
  if (std::holds_alternative<Tour>(a)) return objective(a) < objective(b);
  return objective(a) > objective(b);
}

ProblemGraph problem_graph(const Instance& instance, int sparse_k) {
  if (const auto* tsp = std::get_if<TspInstance>(&instance)) {
    const bool dense = sparse_k <= 0 || sparse_k >= tsp->n - 1;
    return make_tsp_graph(*tsp, dense ? dense_graph(*tsp) : sparsify(*tsp, sparse_k));
  }
  return make_mis_graph(std::get<MisInstance>(instance));
}

SolveResult multi_sample_solve(const Denoiser& model, const NoiseSchedule& sched, const Instance& instance,
                               const DecodeConfig& config) {
  if (config.samples < 1) throw std::invalid_argument("multi_sample_solve: samples must be >= 1");
  const ProblemGraph graph = problem_graph(instance, config.sparse_k);
  const InferenceSchedule inf = make_inference_schedule(config.steps, sched.steps(), config.schedule);
  const int k = config.samples;
  std::vector<std::optional<Solution>> candidates(k);
  std::vector<PhaseTimes> times(k);
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic) if (k > 1)
  for (int c = 0; c < k; ++c) {
    try {
      Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(c)));
      auto start = Clock::now();
      const ChainResult chain = run_reverse_chain(model, sched, inf, graph, rng, config.chain);
      times[c].chain = seconds_since(start);
      start = Clock::now();
      if (const auto* tsp = std::get_if<TspInstance>(&instance)) {
        Tour tour = tsp_greedy_decode(chain.heatmap, *tsp, graph);
        times[c].decode = seconds_since(start);
        if (config.two_opt) {
          start = Clock::now();
          tour = canonical_tour(two_opt(std::move(tour), *tsp, config.two_opt_passes));
          times[c].refine = seconds_since(start);
        }
        candidates[c] = std::move(tour);
      } else {
        candidates[c] = mis_greedy_decode(chain.heatmap, std::get<MisInstance>(instance));
        times[c].decode = seconds_since(start);
      }
    } catch (...) {
#pragma omp critical(gdiff_solve_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  SolveResult result;
  for (int c = 0; c < k; ++c) {
    result.candidates.push_back(std::move(*candidates[c]));
    result.seconds.chain += times[c].chain;
    result.seconds.decode += times[c].decode;
    result.seconds.refine += times[c].refine;
    if (c > 0 && better(result.candidates[c], result.candidates[result.best_index])) result.best_index = c;
  }
  result.best = result.candidates[result.best_index];
  return result;
}

std::string format_solution(const std::string& id, const Solution& solution) {
  std::string out = id + ' ' + format_double(objective(solution));
  const auto& items = std::holds_alternative<Tour>(solution) ? std::get<Tour>(solution).order
                                                             : std::get<IndependentSet>(solution).nodes;
  for (int v : items) out += ' ' + std::to_string(v);
  return out;
}

std::string format_heatmap(const std::string& id, const Heatmap& heatmap, const ProblemGraph& graph) {
  if (heatmap.scores.size() != static_cast<std::size_t>(graph.num_variables()))
    throw std::invalid_argument("format_heatmap: heatmap does not match the graph");
  std::string out = id;
  for (std::size_t i = 0; i < heatmap.scores.size(); ++i) {
    if (heatmap.task == Task::Tsp)
      out += ' ' + std::to_string(graph.src[i]) + ' ' + std::to_string(graph.dst[i]);
    else
      out += ' ' + std::to_string(i);
    out += ' ' + format_double(heatmap.scores[i]);
  }
  return out;
}

}  // namespace gdiff
