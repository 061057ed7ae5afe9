#include "gdiff/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>

namespace gdiff {
namespace {

Task task_of(const Instance& instance) {
  return std::holds_alternative<TspInstance>(instance) ? Task::Tsp : Task::Mis;
}

const std::string& id_of(const Instance& instance) {
  return std::visit([](const auto& inst) -> const std::string& { return inst.id; }, instance);
}

std::optional<double> reference_of(const Instance& instance) {
  if (const auto* tsp = std::get_if<TspInstance>(&instance)) {
    if (tsp->label) return tsp->label->length;
    return std::nullopt;
  }
  const auto& mis = std::get<MisInstance>(instance);
  if (mis.label) return static_cast<double>(mis.label->size());
  return std::nullopt;
}

}  // namespace

double gap_tsp(double pred_length, double ref_length) {
  if (!(ref_length > 0.0)) throw std::invalid_argument("gap_tsp: reference length must be positive");
  return (pred_length - ref_length) / ref_length * 100.0;
}

double gap_mis(double pred_size, double ref_size) {
  if (!(ref_size > 0.0)) throw std::invalid_argument("gap_mis: reference size must be positive");
  return (ref_size - pred_size) / ref_size * 100.0;
}

InfeasibleSolution::InfeasibleSolution(const std::string& id, const std::string& why)
    : std::runtime_error("infeasible solution for instance " + id + ": " + why), id_(id) {}

void validate_solution(const Instance& instance, const Solution& solution) {
  const std::string& id = id_of(instance);
  if (const auto* tsp = std::get_if<TspInstance>(&instance)) {
    const auto* tour = std::get_if<Tour>(&solution);
    if (!tour) throw InfeasibleSolution(id, "expected a tour");
    if (!is_valid_tour(tsp->n, tour->order)) throw InfeasibleSolution(id, "not a permutation of the nodes");
    const double length = tour_length(tsp->coords, tour->order);
    if (std::abs(length - tour->length) > 1e-9 * std::max(1.0, length))
      throw InfeasibleSolution(id, "reported length disagrees with the tour");
    return;
  }
  const auto& mis = std::get<MisInstance>(instance);
  const auto* set = std::get_if<IndependentSet>(&solution);
  if (!set) throw InfeasibleSolution(id, "expected an independent set");
  if (!is_independent_set(mis, set->nodes)) throw InfeasibleSolution(id, "nodes are not independent");
}

EvalReport summarize(Task task, std::vector<EvalRecord> records) {
  EvalReport report;
  report.task = task;
  report.records = std::move(records);
  if (report.records.empty()) return report;
  double objective = 0.0, gap = 0.0, seconds = 0.0;
  bool all_gaps = true;
  for (const auto& r : report.records) {
    objective += r.objective;
    seconds += r.total_seconds();
    if (r.gap) gap += *r.gap;
    else all_gaps = false;
  }
  const double count = static_cast<double>(report.records.size());
  report.mean_objective = objective / count;
  if (all_gaps) report.mean_gap = gap / count;
  report.total_seconds = seconds;
  return report;
}

EvalReport evaluate(const Solver& solver, std::span<const Instance> instances, int seeds, std::uint64_t seed) {
  if (seeds < 1) throw std::invalid_argument("evaluate: need at least one seed");
  if (instances.empty()) throw std::invalid_argument("evaluate: empty instance set");
  const Task task = task_of(instances.front());
  for (const auto& inst : instances)
    if (task_of(inst) != task) throw std::invalid_argument("evaluate: mixed tasks in one instance set");
  const long total = static_cast<long>(instances.size()) * seeds;
  std::vector<EvalRecord> records(total);
  std::vector<std::exception_ptr> failures(total);

#pragma omp parallel for schedule(dynamic)
  for (long job = 0; job < total; ++job) {
    const std::size_t i = static_cast<std::size_t>(job / seeds);
    const int s = static_cast<int>(job % seeds);
    try {
      const Instance& inst = instances[i];
      EvalRecord& rec = records[job];
      rec.id = id_of(inst);
      rec.seed = s;
      const Solution sol = solver(inst, derive_seed(derive_seed(seed, s), i), rec.seconds);
      validate_solution(inst, sol);
      rec.objective = objective(sol);
      if (const auto ref = reference_of(inst))
        rec.gap = task == Task::Tsp ? gap_tsp(rec.objective, *ref) : gap_mis(rec.objective, *ref);
    } catch (...) {
      failures[job] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return summarize(task, std::move(records));
}

Solver model_solver(const Denoiser& model, const NoiseSchedule& sched, const DecodeConfig& config) {
  return [&model, &sched, config](const Instance& inst, std::uint64_t seed, PhaseTimes& times) {
    DecodeConfig cfg = config;
    cfg.seed = seed;
    SolveResult result = multi_sample_solve(model, sched, inst, cfg);
    times = result.seconds;
    return std::move(result.best);
  };
}

Solver label_solver() {
  return [](const Instance& inst, std::uint64_t, PhaseTimes&) -> Solution {
    if (const auto* tsp = std::get_if<TspInstance>(&inst)) {
      if (!tsp->label) throw std::invalid_argument("instance " + tsp->id + " has no label");
      return *tsp->label;
    }
    const auto& mis = std::get<MisInstance>(inst);
    if (!mis.label) throw std::invalid_argument("instance " + mis.id + " has no label");
    return *mis.label;
  };
}

std::vector<SweepCell> sweep(const Denoiser& model, const NoiseSchedule& sched, std::span<const Instance> instances,
                             const DecodeConfig& base, std::span<const int> steps, std::span<const int> samples,
                             int seeds) {
  std::vector<SweepCell> cells;
  for (int m : steps) {
    for (int k : samples) {
      DecodeConfig cfg = base;
      cfg.steps = m;
      cfg.samples = k;
      cells.push_back({m, k, evaluate(model_solver(model, sched, cfg), instances, seeds, base.seed)});
    }
  }
  return cells;
}

std::string plot_data(const EvalReport& report) {
  std::string out = "x,series,value\n";
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const auto& r = report.records[i];
    out += std::to_string(i) + ',' + std::to_string(r.seed) + ',' + format_double(r.gap ? *r.gap : r.objective) + '\n';
  }
  return out;
}

std::string plot_data(std::span<const SweepCell> cells) {
  std::string out = "x,series,value\n";
  for (const auto& c : cells) {
    const double value = c.report.mean_gap ? *c.report.mean_gap : c.report.mean_objective;
    out += std::to_string(c.steps) + ',' + std::to_string(c.samples) + ',' + format_double(value) + '\n';
  }
  return out;
}

void emit_plot_data(const EvalReport& report, const std::filesystem::path& path) {
  write_text(path, plot_data(report));
}

void emit_plot_data(std::span<const SweepCell> cells, const std::filesystem::path& path) {
  write_text(path, plot_data(cells));
}

std::string report_csv(const EvalReport& report) {
  std::string out = "id,seed,objective,gap\n";
  for (const auto& r : report.records)
    out += r.id + ',' + std::to_string(r.seed) + ',' + format_double(r.objective) + ',' +
           (r.gap ? format_double(*r.gap) : std::string()) + '\n';
  return out;
}

std::string timing_csv(const EvalReport& report) {
  std::string out = "id,seed,chain_seconds,decode_seconds,refine_seconds\n";
  for (const auto& r : report.records)
    out += r.id + ',' + std::to_string(r.seed) + ',' + format_double(r.seconds.chain) + ',' +
           format_double(r.seconds.decode) + ',' + format_double(r.seconds.refine) + '\n';
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace gdiff
