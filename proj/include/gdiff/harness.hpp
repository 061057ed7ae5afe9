#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdiff/decoding.hpp"
#include "gdiff/instances.hpp"

namespace gdiff {

/// (pred - ref) / ref * 100
double gap_tsp(double pred_length, double ref_length);
/// (ref - pred) / ref * 100
double gap_mis(double pred_size, double ref_size);

/// Raised when a solver returns an infeasible solution.
class InfeasibleSolution : public std::runtime_error {
 public:
  InfeasibleSolution(const std::string& id, const std::string& why);
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

/// Throws InfeasibleSolution unless `solution` is a valid tour / independent
/// set of `instance` with a consistent objective.
void validate_solution(const Instance& instance, const Solution& solution);

struct EvalRecord {
  std::string id;
  int seed = 0;  // index of the evaluation seed
  double objective = 0.0;
  std::optional<double> gap;
  PhaseTimes seconds;

  double total_seconds() const { return seconds.chain + seconds.decode + seconds.refine; }
};

struct EvalReport {
  Task task = Task::Tsp;
  std::vector<EvalRecord> records;
  double mean_objective = 0.0;
  std::optional<double> mean_gap;  // present iff every record has a gap
  double total_seconds = 0.0;
};

/// Recomputes the aggregates from the records.
EvalReport summarize(Task task, std::vector<EvalRecord> records);

/// Maps (instance, seed) to a solution; fills the phase timings it measures.
using Solver = std::function<Solution(const Instance&, std::uint64_t seed, PhaseTimes& times)>;

/// Solves every instance once per seed index. Seed s of instance i is
/// derive_seed(derive_seed(seed, s), i). Instances run in parallel.
EvalReport evaluate(const Solver& solver, std::span<const Instance> instances, int seeds, std::uint64_t seed);

Solver model_solver(const Denoiser& model, const NoiseSchedule& sched, const DecodeConfig& config);
/// Returns each instance's stored label.
Solver label_solver();

struct SweepCell {
  int steps = 0;
  int samples = 0;
  EvalReport report;
};

/// One evaluation per (steps, samples) pair, steps-major.
std::vector<SweepCell> sweep(const Denoiser& model, const NoiseSchedule& sched, std::span<const Instance> instances,
                             const DecodeConfig& base, std::span<const int> steps, std::span<const int> samples,
                             int seeds);

/// CSV `x,series,value`: record index, seed index, gap (objective when unlabeled).
std::string plot_data(const EvalReport& report);
/// CSV `x,series,value`: steps, samples, mean gap (mean objective when unlabeled).
std::string plot_data(std::span<const SweepCell> cells);
void emit_plot_data(const EvalReport& report, const std::filesystem::path& path);
void emit_plot_data(std::span<const SweepCell> cells, const std::filesystem::path& path);

/// CSV `id,seed,objective,gap`. Carries no timings so reruns are byte-identical.
std::string report_csv(const EvalReport& report);
/// CSV `id,seed,chain_seconds,decode_seconds,refine_seconds`.
std::string timing_csv(const EvalReport& report);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace gdiff
