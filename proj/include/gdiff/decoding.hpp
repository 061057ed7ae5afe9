#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gdiff/denoiser.hpp"
#include "gdiff/diffusion.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/instances.hpp"
#include "gdiff/local_search.hpp"

namespace gdiff {

/// Anything that maps (batch, x_t) to head outputs in the layout of `forward`.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Task task() const = 0;
  virtual Branch branch() const = 0;
  virtual int diffusion_steps() const = 0;
  virtual std::vector<double> predict(const GraphBatch& batch, std::span<const double> xt) const = 0;
};

/// The network in inference mode. Keeps a reference to `params`.
class NetworkDenoiser final : public Denoiser {
 public:
  explicit NetworkDenoiser(const DenoiserParams& params, kernels::Backend backend = kernels::Backend::Omp)
      : params_(params), backend_(backend) {}
  Task task() const override { return params_.config.task; }
  Branch branch() const override { return params_.config.branch; }
  int diffusion_steps() const override { return params_.config.diffusion_steps; }
  std::vector<double> predict(const GraphBatch& batch, std::span<const double> xt) const override;

 private:
  const DenoiserParams& params_;
  kernels::Backend backend_;
};

/// Test double that always predicts a fixed clean solution of a single graph:
/// saturated logits for the discrete branch, the exact noise for the
/// continuous one.
class LabelDenoiser final : public Denoiser {
 public:
  LabelDenoiser(Task task, Branch branch, std::vector<std::uint8_t> label, const NoiseSchedule& sched);
  Task task() const override { return task_; }
  Branch branch() const override { return branch_; }
  int diffusion_steps() const override { return sched_.steps(); }
  std::vector<double> predict(const GraphBatch& batch, std::span<const double> xt) const override;

 private:
  Task task_;
  Branch branch_;
  std::vector<std::uint8_t> label_;
  const NoiseSchedule& sched_;
};

/// Scores in [0, 1], one per variable of the ProblemGraph (directed edges for
/// TSP, nodes for MIS).
struct Heatmap {
  Task task = Task::Tsp;
  std::vector<double> scores;
};

struct ChainOptions {
  StepMode discrete_mode = StepMode::Sample;  // the hop to 0 is always argmax
  ContinuousMode continuous_mode = ContinuousMode::Ddim;
};

struct ChainResult {
  Heatmap heatmap;
  std::vector<std::uint8_t> x0;  // final bits of the chain
};

ChainResult run_reverse_chain(const Denoiser& model, const NoiseSchedule& sched, const InferenceSchedule& inf,
                              const ProblemGraph& graph, Rng& rng, const ChainOptions& options = {});

/// Ranked edge insertion, then nearest-endpoint completion.
Tour tsp_greedy_decode(const Heatmap& heatmap, const TspInstance& instance, const ProblemGraph& graph);

/// Descending score, ties to the lower node index; skips conflicting nodes.
IndependentSet mis_greedy_decode(const Heatmap& heatmap, const MisInstance& instance);

using Solution = std::variant<Tour, IndependentSet>;

/// Tour length or set size.
double objective(const Solution& solution);
/// True when `a` is strictly better than `b` (shorter tour, larger set).
bool better(const Solution& a, const Solution& b);

struct DecodeConfig {
  int steps = 50;    // M
  int samples = 1;   // K
  ScheduleKind schedule = ScheduleKind::Cosine;
  bool two_opt = true;
  int two_opt_passes = kDefaultTwoOptPasses;
  int sparse_k = 0;  // 0 keeps the dense graph
  ChainOptions chain;
  std::uint64_t seed = 0;
};

struct PhaseTimes {
  double chain = 0.0;
  double decode = 0.0;
  double refine = 0.0;
};

struct SolveResult {
  Solution best;
  int best_index = 0;
  std::vector<Solution> candidates;
  PhaseTimes seconds;  // summed over chains
};

/// Graph the model sees for an instance under the given sparsification.
ProblemGraph problem_graph(const Instance& instance, int sparse_k);

/// K independent chains seeded derive_seed(config.seed, c); best candidate
/// wins, ties to the lower chain index. Chains run in parallel.
SolveResult multi_sample_solve(const Denoiser& model, const NoiseSchedule& sched, const Instance& instance,
                               const DecodeConfig& config);

/// `id length <order>` or `id size <nodes>`.
std::string format_solution(const std::string& id, const Solution& solution);
/// `id` then `i j score` triples (TSP) or `i score` pairs (MIS).
std::string format_heatmap(const std::string& id, const Heatmap& heatmap, const ProblemGraph& graph);

}  // namespace gdiff
