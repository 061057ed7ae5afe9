#include "gdiff/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gdiff/checkpoint.hpp"

namespace gdiff {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, int line) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ParseError(line, "bad value '" + value + "' for key '" + key + "'");
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (diffusion_steps < 1) throw std::invalid_argument("config: diffusion_steps must be >= 1");
  if (!(beta_first > 0.0 && beta_first <= beta_last && beta_last < 1.0))
    throw std::invalid_argument("config: need 0 < beta_first <= beta_last < 1");
  if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning_rate must be > 0");
  if (layers < 1 || width < 2 || width % 2 != 0) throw std::invalid_argument("config: invalid model size");
  if (sparse_k < 0) throw std::invalid_argument("config: sparse_k must be >= 0");
  if (checkpoint_every < 0) throw std::invalid_argument("config: checkpoint_every must be >= 0");
}

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string stripped = trim(raw);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected 'key = value'");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    try {
      if (key == "task") cfg.task = parse_task(value);
      else if (key == "branch") cfg.branch = parse_branch(value);
      else if (key == "diffusion_steps") cfg.diffusion_steps = parse_number<int>(key, value, line);
      else if (key == "beta_first") cfg.beta_first = parse_number<double>(key, value, line);
      else if (key == "beta_last") cfg.beta_last = parse_number<double>(key, value, line);
      else if (key == "epochs") cfg.epochs = parse_number<int>(key, value, line);
      else if (key == "batch_size") cfg.batch_size = parse_number<int>(key, value, line);
      else if (key == "learning_rate") cfg.learning_rate = parse_number<double>(key, value, line);
      else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value, line);
      else if (key == "layers") cfg.layers = parse_number<int>(key, value, line);
      else if (key == "width") cfg.width = parse_number<int>(key, value, line);
      else if (key == "sparse_k") cfg.sparse_k = parse_number<int>(key, value, line);
      else if (key == "train_path") cfg.train_path = value;
      else if (key == "checkpoint_path") cfg.checkpoint_path = value;
      else if (key == "log_path") cfg.log_path = value;
      else if (key == "checkpoint_every") cfg.checkpoint_every = parse_number<int>(key, value, line);
      else if (key == "warm_start") cfg.warm_start = value;
      else throw ParseError(line, "unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw ParseError(line, e.what());
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_train_config(buf.str());
}

TrainingExample make_example(const TspInstance& instance, int sparse_k) {
  if (!instance.label) throw std::invalid_argument("instance " + instance.id + " has no label");
  TrainingExample ex;
  ex.id = instance.id;
  const SparseGraph sparse =
      (sparse_k <= 0 || sparse_k >= instance.n) ? dense_graph(instance) : sparsify(instance, sparse_k);
  ex.graph = make_tsp_graph(instance, sparse);
  ex.label = tsp_label_bits(ex.graph, *instance.label);
  return ex;
}

TrainingExample make_example(const MisInstance& instance) {
  if (!instance.label) throw std::invalid_argument("instance " + instance.id + " has no label");
  TrainingExample ex;
  ex.id = instance.id;
  ex.graph = make_mis_graph(instance);
  ex.label = mis_label_bits(instance.n, *instance.label);
  return ex;
}

LossResult loss_discrete(std::span<const double> logits, std::span<const std::uint8_t> x0) {
  if (logits.size() != 2 * x0.size()) throw std::invalid_argument("loss_discrete: shape mismatch");
  LossResult r;
  r.grad.resize(logits.size());
  if (x0.empty()) return r;
  const double inv = 1.0 / static_cast<double>(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double a = logits[2 * i];
    const double b = logits[2 * i + 1];
    const double top = std::max(a, b);
    const double lse = top + std::log(std::exp(a - top) + std::exp(b - top));
    const double p0 = std::exp(a - lse);
    const double p1 = std::exp(b - lse);
    const int y = x0[i] ? 1 : 0;
    r.loss += lse - (y ? b : a);
    r.grad[2 * i] = (p0 - (y == 0 ? 1.0 : 0.0)) * inv;
    r.grad[2 * i + 1] = (p1 - (y == 1 ? 1.0 : 0.0)) * inv;
  }
  r.loss *= inv;
  return r;
}

LossResult loss_continuous(std::span<const double> pred_eps, std::span<const double> eps) {
  if (pred_eps.size() != eps.size()) throw std::invalid_argument("loss_continuous: shape mismatch");
  LossResult r;
  r.grad.resize(eps.size());
  if (eps.empty()) return r;
  const double inv = 1.0 / static_cast<double>(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double diff = pred_eps[i] - eps[i];
    r.loss += diff * diff;
    r.grad[i] = 2.0 * diff * inv;
  }
  r.loss *= inv;
  return r;
}

void adam_update(std::span<double> values, std::span<const double> grads, AdamState& state, double lr) {
  if (values.size() != grads.size()) throw std::invalid_argument("adam_update: shape mismatch");
  if (state.first.size() != values.size()) {
    state.first.assign(values.size(), 0.0);
    state.second.assign(values.size(), 0.0);
  }
  ++state.steps;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.steps));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.steps));
  for (std::size_t i = 0; i < values.size(); ++i) {
    state.first[i] = kAdamBeta1 * state.first[i] + (1.0 - kAdamBeta1) * grads[i];
    state.second[i] = kAdamBeta2 * state.second[i] + (1.0 - kAdamBeta2) * grads[i] * grads[i];
    const double m_hat = state.first[i] / c1;
    const double v_hat = state.second[i] / c2;
    values[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

double cosine_lr(double peak, long step, long total_steps) {
  if (total_steps <= 0) return peak;
  const double progress = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
  const double c = std::cos(progress * std::numbers::pi / 2.0);
  return peak * c * c;
}

TrainState make_train_state(DenoiserParams params, std::uint64_t seed) {
  TrainState s;
  s.params = std::move(params);
  s.adam.first.assign(s.params.values.size(), 0.0);
  s.adam.second.assign(s.params.values.size(), 0.0);
  s.rng.seed(seed);
  return s;
}

NoisedBatch corrupt_batch(std::span<const TrainingExample* const> examples, const NoiseSchedule& sched,
                          Branch branch, Rng& rng) {
  if (examples.empty()) throw std::invalid_argument("corrupt_batch: empty batch");
  std::vector<const ProblemGraph*> graphs;
  std::vector<int> timesteps;
  NoisedBatch out;
  out.branch = branch;
  for (const TrainingExample* ex : examples) {
    if (static_cast<int>(ex->label.size()) != ex->graph.num_variables())
      throw std::invalid_argument("corrupt_batch: example " + ex->id + " is unlabeled or mislabeled");
    const int t = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(sched.steps()));
    graphs.push_back(&ex->graph);
    timesteps.push_back(t);
    out.x0.insert(out.x0.end(), ex->label.begin(), ex->label.end());
    if (branch == Branch::Discrete) {
      const auto noisy = discrete_forward_sample(ex->label, t, sched, rng);
      out.xt.insert(out.xt.end(), noisy.begin(), noisy.end());
    } else {
      auto noisy = continuous_forward_sample(std::span<const std::uint8_t>(ex->label), t, sched, rng);
      out.xt.insert(out.xt.end(), noisy.xt.begin(), noisy.xt.end());
      out.eps.insert(out.eps.end(), noisy.eps.begin(), noisy.eps.end());
    }
  }
  out.batch = make_batch(graphs, timesteps);
  return out;
}

namespace {

LossResult batch_loss(const NoisedBatch& noised, std::span<const double> outputs) {
  return noised.branch == Branch::Discrete ? loss_discrete(outputs, noised.x0)
                                           : loss_continuous(outputs, noised.eps);
}

}  // namespace

double evaluate_loss(const DenoiserParams& params, const NoisedBatch& noised) {
  const auto fwd = forward(params, noised.batch, noised.xt, true);
  return batch_loss(noised, fwd.outputs).loss;
}

StepMetrics apply_step(TrainState& state, const NoisedBatch& noised, double lr) {
  if (noised.branch != state.params.config.branch)
    throw std::invalid_argument("apply_step: batch branch does not match the model");
  const auto fwd = forward(state.params, noised.batch, noised.xt, true);
  const LossResult loss = batch_loss(noised, fwd.outputs);
  const auto grads = backward(state.params, fwd.cache, loss.grad);
  update_running_stats(state.params, fwd.cache);
  adam_update(state.params.values, grads, state.adam, lr);
  ++state.params.version;
  ++state.step;
  return {loss.loss, lr};
}

StepMetrics train_step(TrainState& state, std::span<const TrainingExample* const> examples,
                       const NoiseSchedule& sched, double peak_lr, long total_steps) {
  const double lr = cosine_lr(peak_lr, state.step, total_steps);
  const NoisedBatch noised = corrupt_batch(examples, sched, state.params.config.branch, state.rng);
  return apply_step(state, noised, lr);
}

void write_train_log(const std::filesystem::path& path, std::span<const StepRecord> log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open log " + path.string());
  out.precision(10);
  for (const auto& r : log) out << r.step << '\t' << r.loss << '\t' << r.lr << '\t' << r.seconds << '\n';
}

TrainResult train(const TrainConfig& config, std::span<const TrainingExample> examples) {
  config.validate();
  const NoiseSchedule sched = config.noise_schedule();
  DenoiserParams params;
  if (!config.warm_start.empty()) {
    params = load_checkpoint(config.warm_start);
    if (!(params.config == config.model())) throw std::invalid_argument("warm-start checkpoint does not match config");
  } else {
    params = init_params(config.model(), derive_seed(config.seed, 1));
  }
  TrainResult result;
  result.state = make_train_state(std::move(params), derive_seed(config.seed, 2));
  TrainState& state = result.state;
  if (config.epochs > 0 && examples.empty()) throw std::invalid_argument("train: empty training set");

  const long batches_per_epoch =
      (static_cast<long>(examples.size()) + config.batch_size - 1) / config.batch_size;
  const long total_steps = batches_per_epoch * config.epochs;
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const TrainingExample*> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    state.epoch = epoch;
    std::shuffle(order.begin(), order.end(), state.rng);
    double epoch_sum = 0.0;
    long epoch_batches = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      batch.clear();
      for (std::size_t i = first; i < std::min(order.size(), first + config.batch_size); ++i)
        batch.push_back(&examples[order[i]]);
      const StepMetrics metrics = train_step(state, batch, sched, config.learning_rate, total_steps);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.log.push_back({state.step, metrics.loss, metrics.lr, seconds});
      epoch_sum += metrics.loss;
      ++epoch_batches;
      if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
          state.step % config.checkpoint_every == 0)
        save_checkpoint(state.params, config.checkpoint_path);
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(std::max<long>(epoch_batches, 1)));
  }
  state.epoch = config.epochs;
  if (!config.checkpoint_path.empty()) save_checkpoint(state.params, config.checkpoint_path);
  if (!config.log_path.empty()) write_train_log(config.log_path, result.log);
  return result;
}

TrainResult train(const TrainConfig& config) {
  if (config.train_path.empty()) throw std::invalid_argument("train: config has no train_path");
  std::vector<TrainingExample> examples;
  for (const auto& inst : load_instances(config.train_path)) {
    if (const auto* tsp = std::get_if<TspInstance>(&inst)) {
      if (config.task != Task::Tsp) throw std::invalid_argument("train: TSP instance in a MIS training set");
      examples.push_back(make_example(*tsp, config.sparse_k));
    } else {
      if (config.task != Task::Mis) throw std::invalid_argument("train: MIS instance in a TSP training set");
      examples.push_back(make_example(std::get<MisInstance>(inst)));
    }
  }
  return train(config, examples);
}

}  // namespace gdiff
