#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gdiff/denoiser.hpp"
#include "gdiff/diffusion.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/instances.hpp"

namespace gdiff {

/// Keys of the flat `key = value` config file mirror the field names.
struct TrainConfig {
  Task task = Task::Tsp;
  Branch branch = Branch::Discrete;
  int diffusion_steps = 1000;
  double beta_first = 1e-4;
  double beta_last = 0.02;
  int epochs = 50;
  int batch_size = 16;
  double learning_rate = 2e-4;
  std::uint64_t seed = 0;
  int layers = 12;
  int width = 256;
  int sparse_k = 0;  // 0 keeps the dense graph
  std::string train_path;
  std::string checkpoint_path;
  std::string log_path;
  int checkpoint_every = 0;  // steps; 0 writes only the final checkpoint
  std::string warm_start;    // checkpoint to initialize from

  ModelConfig model() const { return {task, branch, layers, width, diffusion_steps, beta_first, beta_last}; }
  NoiseSchedule noise_schedule() const { return model().noise_schedule(); }
  void validate() const;
};

TrainConfig parse_train_config(std::string_view text);
TrainConfig load_train_config(const std::filesystem::path& path);

/// A labeled instance in network form.
struct TrainingExample {
  std::string id;
  ProblemGraph graph;
  std::vector<std::uint8_t> label;
};

TrainingExample make_example(const TspInstance& instance, int sparse_k);
TrainingExample make_example(const MisInstance& instance);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // dLoss/dOutputs
};

/// Mean cross-entropy of softmax(logit pairs) against the clean bits.
LossResult loss_discrete(std::span<const double> logits, std::span<const std::uint8_t> x0);
/// Mean squared error between predicted and true noise.
LossResult loss_continuous(std::span<const double> pred_eps, std::span<const double> eps);

struct AdamState {
  std::vector<double> first;
  std::vector<double> second;
  long steps = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

void adam_update(std::span<double> values, std::span<const double> grads, AdamState& state, double lr);

/// peak * cos^2(pi/2 * step/total): peak at step 0, zero at the last step.
double cosine_lr(double peak, long step, long total_steps);

struct TrainState {
  DenoiserParams params;
  AdamState adam;
  long step = 0;
  int epoch = 0;
  Rng rng;
};

TrainState make_train_state(DenoiserParams params, std::uint64_t seed);

/// Labels corrupted at one uniformly drawn timestep per instance.
struct NoisedBatch {
  Branch branch = Branch::Discrete;
  GraphBatch batch;
  std::vector<double> xt;
  std::vector<std::uint8_t> x0;
  std::vector<double> eps;  // continuous only
};

NoisedBatch corrupt_batch(std::span<const TrainingExample* const> examples, const NoiseSchedule& sched,
                          Branch branch, Rng& rng);

/// Training-mode loss of the batch (no update).
double evaluate_loss(const DenoiserParams& params, const NoisedBatch& noised);

struct StepMetrics {
  double loss = 0.0;
  double lr = 0.0;
};

/// Forward, backward and one Adam update at the given learning rate.
StepMetrics apply_step(TrainState& state, const NoisedBatch& noised, double lr);

/// corrupt_batch + apply_step with the cosine-decayed rate for state.step.
StepMetrics train_step(TrainState& state, std::span<const TrainingExample* const> examples,
                       const NoiseSchedule& sched, double peak_lr, long total_steps);

struct StepRecord {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  TrainState state;
  std::vector<StepRecord> log;
  std::vector<double> epoch_loss;  // mean loss per epoch
};

/// Trains on in-memory examples. Writes checkpoint and log when the config
/// names paths for them.
TrainResult train(const TrainConfig& config, std::span<const TrainingExample> examples);
/// Loads `config.train_path` (labels required) and trains.
TrainResult train(const TrainConfig& config);

void write_train_log(const std::filesystem::path& path, std::span<const StepRecord> log);

}  // namespace gdiff
