#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gdiff/common.hpp"
#include "gdiff/diffusion.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/kernels.hpp"

namespace gdiff {

struct ModelConfig {
  Task task = Task::Tsp;
  Branch branch = Branch::Discrete;
  int layers = 12;
  int width = 256;
  // Training noise schedule; travels with the weights.
  int diffusion_steps = 1000;
  double beta_first = 1e-4;
  double beta_last = 0.02;

  int output_width() const { return branch == Branch::Discrete ? 2 : 1; }
  NoiseSchedule noise_schedule() const { return NoiseSchedule::linear(diffusion_steps, beta_first, beta_last); }
  bool operator==(const ModelConfig&) const = default;
};

enum class ParamKind { Weight, Bias, BnScale, BnShift };

/// A named block of the flat parameter buffer.
struct TensorSlot {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 1;
  ParamKind kind = ParamKind::Weight;
  int fan_in = 1;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Weight (out x in) plus optional bias (out).
struct LinearSlot {
  int weight = -1;
  int bias = -1;
  int out = 0;
  int in = 0;
};

struct LayerSlots {
  int U = -1, V = -1, P = -1, Q = -1, R = -1;
  LinearSlot edge_mlp1, edge_mlp2;
  LinearSlot time_mlp1, time_mlp2;
  int edge_bn_scale = -1, edge_bn_shift = -1;
  int node_bn_scale = -1, node_bn_shift = -1;
};

/// Fixed tensor order of a model; also the checkpoint order.
struct ParamLayout {
  std::vector<TensorSlot> tensors;
  LinearSlot node_input;
  LinearSlot edge_input;  // TSP only: lifts (x_t, edge length)
  std::vector<LayerSlots> layers;
  LinearSlot head;
  std::size_t total = 0;

  static ParamLayout build(const ModelConfig& config);
};

/// Input width of the node lift: the coordinate sinusoid (TSP) or the scalar x_t (MIS).
int node_input_width(const ModelConfig& config);

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

struct DenoiserParams {
  ModelConfig config;
  ParamLayout layout;
  std::vector<double> values;
  /// Per layer: edge mean, edge var, node mean, node var (width each).
  std::vector<double> running;
  /// Bumped on every in-place update; a forward cache remembers it.
  std::uint64_t version = 0;

  std::span<double> tensor(int slot);
  std::span<const double> tensor(int slot) const;
  std::span<double> running_block(int layer, int which);
  std::span<const double> running_block(int layer, int which) const;
};

std::size_t parameter_count(const ModelConfig& config);

/// Uniform in +-1/sqrt(fan_in) for weights and biases; BN scale 1, shift 0;
/// running mean 0, running variance 1.
DenoiserParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Interleaved sin/cos of `t` at geometric frequencies 10000^(-2k/dim).
std::vector<double> sinusoidal_embedding(int t, int dim);

/// Same construction for any value and length; odd lengths end with a sine.
void sinusoid_fill(double value, std::span<double> out, double max_period);

struct BatchNormCache {
  std::vector<double> normalized;
  std::vector<double> inv_std;
};

struct LayerCache {
  std::vector<double> h_in, e_in;
  std::vector<double> edge_pre;   // e-hat
  BatchNormCache edge_bn;
  std::vector<double> edge_bn_out;
  std::vector<double> mlp_hidden;  // pre-activation
  std::vector<double> time_hidden;  // pre-activation, per graph
  std::vector<double> gate;
  std::vector<double> vh;
  BatchNormCache node_bn;
  std::vector<double> node_bn_out;
  std::vector<double> edge_mean, edge_var, node_mean, node_var;  // batch moments
};

struct ForwardCache {
  const DenoiserParams* params = nullptr;
  std::uint64_t version = 0;
  const GraphBatch* batch = nullptr;
  bool train_mode = false;
  kernels::Backend backend = kernels::Backend::Omp;
  std::vector<double> xt;
  std::vector<double> edge_features;  // TSP: (x_t, length) per edge
  std::vector<double> node_features;  // input to the node lift
  std::vector<double> time_features;  // per graph
  std::vector<LayerCache> layers;
  std::vector<double> h_final, e_final;
};

struct ForwardResult {
  /// num_variables x output_width: two logits (discrete) or one noise estimate.
  std::vector<double> outputs;
  ForwardCache cache;
};

/// Evaluates the network on a batch. `xt` holds one value per variable of the
/// batch. Training mode normalizes with batch moments, inference mode with the
/// running statistics. The batch must outlive the returned cache.
ForwardResult forward(const DenoiserParams& params, const GraphBatch& batch, std::span<const double> xt,
                      bool train_mode, kernels::Backend backend = kernels::Backend::Omp);

/// Gradient of a scalar loss w.r.t. every parameter, given dLoss/dOutputs.
std::vector<double> backward(const DenoiserParams& params, const ForwardCache& cache,
                             std::span<const double> output_grad);

/// Folds a training-mode forward's batch moments into the running statistics.
void update_running_stats(DenoiserParams& params, const ForwardCache& cache,
                          double momentum = kBatchNormMomentum);

/// Softmax over each pair of logits.
std::vector<CatRow> predict_x0_probs(std::span<const double> outputs, Branch branch);
/// Identity over single-column outputs.
std::vector<double> predict_eps(std::span<const double> outputs, Branch branch);

}  // namespace gdiff
