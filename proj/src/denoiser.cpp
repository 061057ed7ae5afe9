#include "gdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gdiff {
namespace {

// Coordinates in [0, 1] are stretched before encoding so the fastest
// frequency resolves a few hundredths of the unit square.
constexpr double kCoordScale = 100.0;
constexpr double kCoordPeriod = 1000.0;
constexpr double kTimePeriod = 10000.0;

using Vec = std::vector<double>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void relu_into(std::span<const double> x, Vec& out) {
  out.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void add_into(Vec& acc, std::span<const double> x) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

/// BN over rows: normalized = (x - mean) * inv_std; y = scale * normalized + shift.
void batchnorm_forward(std::span<const double> x, int rows, int cols, std::span<const double> mean,
                       std::span<const double> var, std::span<const double> scale, std::span<const double> shift,
                       BatchNormCache& cache, Vec& y) {
  cache.inv_std.resize(cols);
  for (int c = 0; c < cols; ++c) cache.inv_std[c] = 1.0 / std::sqrt(var[c] + kBatchNormEps);
  cache.normalized.resize(static_cast<std::size_t>(rows) * cols);
  y.resize(cache.normalized.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      cache.normalized[i] = (x[i] - mean[c]) * cache.inv_std[c];
      y[i] = scale[c] * cache.normalized[i] + shift[c];
    }
}

void batchnorm_backward(std::span<const double> dy, int rows, int cols, const BatchNormCache& cache,
                        std::span<const double> scale, bool batch_stats, std::span<double> dscale,
                        std::span<double> dshift, Vec& dx) {
  Vec sum_dy(cols, 0.0), sum_dy_norm(cols, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      sum_dy[c] += dy[i];
      sum_dy_norm[c] += dy[i] * cache.normalized[i];
    }
  for (int c = 0; c < cols; ++c) {
    dscale[c] += sum_dy_norm[c];
    dshift[c] += sum_dy[c];
  }
  dx.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      const double g = scale[c] * cache.inv_std[c];
      if (batch_stats)
        dx[i] = g * (dy[i] - sum_dy[c] / rows - cache.normalized[i] * sum_dy_norm[c] / rows);
      else
        dx[i] = g * dy[i];
    }
}

class Net {
 public:
  Net(const DenoiserParams& params, kernels::Backend backend)
      : p_(params), k_(kernels::kernel_set(backend)), d_(params.config.width) {}

  Vec linear(std::span<const double> x, int rows, const LinearSlot& s) const {
    Vec y(static_cast<std::size_t>(rows) * s.out);
    const auto b = s.bias >= 0 ? p_.tensor(s.bias) : std::span<const double>{};
    k_.linear_forward(x, p_.tensor(s.weight), b, y, rows, s.in, s.out);
    return y;
  }

  Vec square(std::span<const double> x, int rows, int slot) const {
    Vec y(static_cast<std::size_t>(rows) * d_);
    k_.linear_forward(x, p_.tensor(slot), {}, y, rows, d_, d_);
    return y;
  }

  void linear_back(std::span<const double> dy, std::span<const double> x, int rows, const LinearSlot& s,
                   Vec& grads, Vec* dx, bool accumulate) const {
    const auto& ws = p_.layout.tensors[s.weight];
    std::span<double> dw(grads.data() + ws.offset, ws.size());
    std::span<double> db;
    if (s.bias >= 0) {
      const auto& bs = p_.layout.tensors[s.bias];
      db = std::span<double>(grads.data() + bs.offset, bs.size());
    }
    k_.linear_backward_params(dy, x, dw, db, rows, s.in, s.out);
    if (dx) {
      if (!accumulate) dx->assign(static_cast<std::size_t>(rows) * s.in, 0.0);
      k_.linear_backward_input(dy, p_.tensor(s.weight), *dx, rows, s.in, s.out, true);
    }
  }

  void square_back(std::span<const double> dy, std::span<const double> x, int rows, int slot, Vec& grads,
                   Vec& dx) const {
    linear_back(dy, x, rows, LinearSlot{slot, -1, d_, d_}, grads, &dx, true);
  }

  const DenoiserParams& p_;
  const kernels::KernelSet& k_;
  int d_;
};

}  // namespace

std::span<double> DenoiserParams::tensor(int slot) {
  const auto& s = layout.tensors.at(slot);
  return {values.data() + s.offset, s.size()};
}

std::span<const double> DenoiserParams::tensor(int slot) const {
  const auto& s = layout.tensors.at(slot);
  return {values.data() + s.offset, s.size()};
}

std::span<double> DenoiserParams::running_block(int layer, int which) {
  const std::size_t d = config.width;
  return {running.data() + (static_cast<std::size_t>(layer) * 4 + which) * d, d};
}

std::span<const double> DenoiserParams::running_block(int layer, int which) const {
  const std::size_t d = config.width;
  return {running.data() + (static_cast<std::size_t>(layer) * 4 + which) * d, d};
}

int node_input_width(const ModelConfig& config) { return config.task == Task::Tsp ? config.width : 1; }

ParamLayout ParamLayout::build(const ModelConfig& config) {
  if (config.layers < 1) throw std::invalid_argument("model needs at least one layer");
  if (config.width < 2 || config.width % 2 != 0) throw std::invalid_argument("model width must be even and >= 2");
  ParamLayout layout;
  const int d = config.width;
  auto add = [&](std::string name, int rows, int cols, ParamKind kind, int fan_in) {
    TensorSlot s{std::move(name), layout.total, rows, cols, kind, fan_in};
    layout.total += s.size();
    layout.tensors.push_back(std::move(s));
    return static_cast<int>(layout.tensors.size()) - 1;
  };
  auto add_linear = [&](const std::string& name, int out, int in, bool bias) {
    LinearSlot s;
    s.out = out;
    s.in = in;
    s.weight = add(name + ".weight", out, in, ParamKind::Weight, in);
    if (bias) s.bias = add(name + ".bias", out, 1, ParamKind::Bias, in);
    return s;
  };
  layout.node_input = add_linear("node_input", d, node_input_width(config), true);
  if (config.task == Task::Tsp) layout.edge_input = add_linear("edge_input", d, 2, true);
  for (int l = 0; l < config.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    LayerSlots ls;
    ls.U = add(pre + "U", d, d, ParamKind::Weight, d);
    ls.V = add(pre + "V", d, d, ParamKind::Weight, d);
    ls.P = add(pre + "P", d, d, ParamKind::Weight, d);
    ls.Q = add(pre + "Q", d, d, ParamKind::Weight, d);
    ls.R = add(pre + "R", d, d, ParamKind::Weight, d);
    ls.edge_mlp1 = add_linear(pre + "edge_mlp1", d, d, true);
    ls.edge_mlp2 = add_linear(pre + "edge_mlp2", d, d, true);
    ls.time_mlp1 = add_linear(pre + "time_mlp1", d, d, true);
    ls.time_mlp2 = add_linear(pre + "time_mlp2", d, d, true);
    ls.edge_bn_scale = add(pre + "edge_bn.scale", d, 1, ParamKind::BnScale, 1);
    ls.edge_bn_shift = add(pre + "edge_bn.shift", d, 1, ParamKind::BnShift, 1);
    ls.node_bn_scale = add(pre + "node_bn.scale", d, 1, ParamKind::BnScale, 1);
    ls.node_bn_shift = add(pre + "node_bn.shift", d, 1, ParamKind::BnShift, 1);
    layout.layers.push_back(ls);
  }
  layout.head = add_linear("head", config.output_width(), d, true);
  return layout;
}

std::size_t parameter_count(const ModelConfig& config) { return ParamLayout::build(config).total; }

DenoiserParams init_params(const ModelConfig& config, std::uint64_t seed) {
  DenoiserParams p;
  p.config = config;
  p.layout = ParamLayout::build(config);
  p.values.assign(p.layout.total, 0.0);
  Rng rng(seed);
  for (std::size_t s = 0; s < p.layout.tensors.size(); ++s) {
    const auto& slot = p.layout.tensors[s];
    auto t = p.tensor(static_cast<int>(s));
    switch (slot.kind) {
      case ParamKind::Weight:
      case ParamKind::Bias: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(slot.fan_in));
        for (double& v : t) v = (2.0 * uniform01(rng) - 1.0) * bound;
        break;
      }
      case ParamKind::BnScale:
        std::fill(t.begin(), t.end(), 1.0);
        break;
      case ParamKind::BnShift:
        std::fill(t.begin(), t.end(), 0.0);
        break;
    }
  }
  p.running.assign(static_cast<std::size_t>(config.layers) * 4 * config.width, 0.0);
  for (int l = 0; l < config.layers; ++l) {
    auto ev = p.running_block(l, 1);
    auto nv = p.running_block(l, 3);
    std::fill(ev.begin(), ev.end(), 1.0);
    std::fill(nv.begin(), nv.end(), 1.0);
  }
  return p;
}

void sinusoid_fill(double value, std::span<double> out, double max_period) {
  const std::size_t len = out.size();
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t k = i / 2;
    const double freq = std::pow(max_period, -2.0 * static_cast<double>(k) / static_cast<double>(len));
    out[i] = (i % 2 == 0) ? std::sin(value * freq) : std::cos(value * freq);
  }
}

std::vector<double> sinusoidal_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("sinusoidal_embedding: dim must be even");
  std::vector<double> out(dim);
  sinusoid_fill(static_cast<double>(t), out, kTimePeriod);
  return out;
}

ForwardResult forward(const DenoiserParams& params, const GraphBatch& batch, std::span<const double> xt,
                      bool train_mode, kernels::Backend backend) {
  const ModelConfig& cfg = params.config;
  if (batch.task != cfg.task) throw std::invalid_argument("forward: batch task does not match the model");
  if (static_cast<int>(xt.size()) != batch.num_variables())
    throw std::invalid_argument("forward: x_t has " + std::to_string(xt.size()) + " entries, expected " +
                                std::to_string(batch.num_variables()));
  const Net net(params, backend);
  const auto& K = net.k_;
  const int d = cfg.width;
  const int n = batch.num_nodes;
  const int m = batch.num_edges();
  const int graphs = batch.num_graphs;
  const auto& layout = params.layout;

  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.params = &params;
  cache.version = params.version;
  cache.batch = &batch;
  cache.train_mode = train_mode;
  cache.backend = backend;
  cache.xt.assign(xt.begin(), xt.end());

  cache.time_features.resize(static_cast<std::size_t>(graphs) * d);
  for (int g = 0; g < graphs; ++g) {
    const auto emb = sinusoidal_embedding(batch.timesteps[g], d);
    std::copy(emb.begin(), emb.end(), cache.time_features.begin() + static_cast<std::ptrdiff_t>(g) * d);
  }

  Vec h, e;
  const int in_width = node_input_width(cfg);
  cache.node_features.resize(static_cast<std::size_t>(n) * in_width);
  if (cfg.task == Task::Tsp) {
    const int half = d / 2;
    for (int i = 0; i < n; ++i) {
      std::span<double> row(cache.node_features.data() + static_cast<std::size_t>(i) * d, d);
      sinusoid_fill(batch.coords[i].x * kCoordScale, row.first(half), kCoordPeriod);
      sinusoid_fill(batch.coords[i].y * kCoordScale, row.subspan(half), kCoordPeriod);
    }
    cache.edge_features.resize(static_cast<std::size_t>(m) * 2);
    for (int k = 0; k < m; ++k) {
      cache.edge_features[2 * k] = xt[k];
      cache.edge_features[2 * k + 1] = batch.edge_length[k];
    }
    h = net.linear(cache.node_features, n, layout.node_input);
    e = net.linear(cache.edge_features, m, layout.edge_input);
  } else {
    std::copy(xt.begin(), xt.end(), cache.node_features.begin());
    h = net.linear(cache.node_features, n, layout.node_input);
    e.assign(static_cast<std::size_t>(m) * d, 0.0);
  }

  cache.layers.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    const LayerSlots& ls = layout.layers[l];
    LayerCache& lc = cache.layers[l];
    lc.h_in = h;
    lc.e_in = e;

    const Vec qh = net.square(h, n, ls.Q);
    const Vec rh = net.square(h, n, ls.R);
    const Vec pe = net.square(e, m, ls.P);
    lc.edge_pre.resize(static_cast<std::size_t>(m) * d);
    K.edge_gather(pe, qh, rh, batch.src, batch.dst, lc.edge_pre, d);

    lc.edge_mean.assign(d, 0.0);
    lc.edge_var.assign(d, 0.0);
    if (train_mode) K.column_moments(lc.edge_pre, lc.edge_mean, lc.edge_var, m, d);
    batchnorm_forward(lc.edge_pre, m, d, train_mode ? std::span<const double>(lc.edge_mean) : params.running_block(l, 0),
                      train_mode ? std::span<const double>(lc.edge_var) : params.running_block(l, 1),
                      params.tensor(ls.edge_bn_scale), params.tensor(ls.edge_bn_shift), lc.edge_bn, lc.edge_bn_out);

    lc.mlp_hidden = net.linear(lc.edge_bn_out, m, ls.edge_mlp1);
    Vec act;
    relu_into(lc.mlp_hidden, act);
    const Vec me = net.linear(act, m, ls.edge_mlp2);

    lc.time_hidden = net.linear(cache.time_features, graphs, ls.time_mlp1);
    relu_into(lc.time_hidden, act);
    const Vec tt = net.linear(act, graphs, ls.time_mlp2);

    Vec e_next(static_cast<std::size_t>(m) * d);
    for (int k = 0; k < m; ++k) {
      const double* t_row = tt.data() + static_cast<std::size_t>(batch.edge_graph[k]) * d;
      for (int c = 0; c < d; ++c) {
        const std::size_t i = static_cast<std::size_t>(k) * d + c;
        e_next[i] = e[i] + me[i] + t_row[c];
      }
    }

    lc.gate.resize(lc.edge_pre.size());
    for (std::size_t i = 0; i < lc.gate.size(); ++i) lc.gate[i] = sigmoid(lc.edge_pre[i]);
    lc.vh = net.square(h, n, ls.V);
    Vec node_pre = net.square(h, n, ls.U);
    Vec agg(static_cast<std::size_t>(n) * d);
    K.gated_aggregate(lc.gate, lc.vh, batch.by_src, batch.dst, agg, d);
    add_into(node_pre, agg);

    lc.node_mean.assign(d, 0.0);
    lc.node_var.assign(d, 0.0);
    if (train_mode) K.column_moments(node_pre, lc.node_mean, lc.node_var, n, d);
    batchnorm_forward(node_pre, n, d, train_mode ? std::span<const double>(lc.node_mean) : params.running_block(l, 2),
                      train_mode ? std::span<const double>(lc.node_var) : params.running_block(l, 3),
                      params.tensor(ls.node_bn_scale), params.tensor(ls.node_bn_shift), lc.node_bn, lc.node_bn_out);

    Vec h_next = h;
    for (std::size_t i = 0; i < h_next.size(); ++i)
      if (lc.node_bn_out[i] > 0.0) h_next[i] += lc.node_bn_out[i];

    h = std::move(h_next);
    e = std::move(e_next);
  }
  cache.h_final = std::move(h);
  cache.e_final = std::move(e);
  if (cfg.task == Task::Tsp)
    result.outputs = net.linear(cache.e_final, m, layout.head);
  else
    result.outputs = net.linear(cache.h_final, n, layout.head);
  return result;
}

std::vector<double> backward(const DenoiserParams& params, const ForwardCache& cache,
                             std::span<const double> output_grad) {
  if (cache.params != &params || cache.version != params.version)
    throw std::logic_error("backward: stale forward cache (parameters changed since forward)");
  const GraphBatch& batch = *cache.batch;
  const ModelConfig& cfg = params.config;
  const auto& layout = params.layout;
  const int d = cfg.width;
  const int n = batch.num_nodes;
  const int m = batch.num_edges();
  const int graphs = batch.num_graphs;
  const int c_out = cfg.output_width();
  if (static_cast<int>(output_grad.size()) != batch.num_variables() * c_out)
    throw std::invalid_argument("backward: output gradient has the wrong shape");

  const Net net(params, cache.backend);
  const auto& K = net.k_;
  Vec grads(layout.total, 0.0);
  auto grad_of = [&](int slot) {
    const auto& s = layout.tensors[slot];
    return std::span<double>(grads.data() + s.offset, s.size());
  };

  Vec dh(static_cast<std::size_t>(n) * d, 0.0);
  Vec de(static_cast<std::size_t>(m) * d, 0.0);
  if (cfg.task == Task::Tsp)
    net.linear_back(output_grad, cache.e_final, m, layout.head, grads, &de, false);
  else
    net.linear_back(output_grad, cache.h_final, n, layout.head, grads, &dh, false);

  kernels::Csr edges_by_graph;
  edges_by_graph.offsets = batch.edge_offset;
  edges_by_graph.items.resize(m);
  for (int k = 0; k < m; ++k) edges_by_graph.items[k] = k;

  for (int l = cfg.layers - 1; l >= 0; --l) {
    const LayerSlots& ls = layout.layers[l];
    const LayerCache& lc = cache.layers[l];
    Vec dh_in = dh;
    Vec de_in = de;

    // Node path: h' = h + relu(BN(U h + agg)).
    Vec dbn(dh.size());
    for (std::size_t i = 0; i < dh.size(); ++i) dbn[i] = lc.node_bn_out[i] > 0.0 ? dh[i] : 0.0;
    Vec dnode_pre;
    batchnorm_backward(dbn, n, d, lc.node_bn, params.tensor(ls.node_bn_scale), cache.train_mode,
                       grad_of(ls.node_bn_scale), grad_of(ls.node_bn_shift), dnode_pre);
    net.square_back(dnode_pre, lc.h_in, n, ls.U, grads, dh_in);
    Vec dgate(static_cast<std::size_t>(m) * d);
    Vec dvh(static_cast<std::size_t>(n) * d);
    K.gated_aggregate_backward(dnode_pre, lc.gate, lc.vh, batch.src, batch.dst, batch.by_dst, dgate, dvh, d);
    net.square_back(dvh, lc.h_in, n, ls.V, grads, dh_in);
    Vec dedge_pre(dgate.size());
    for (std::size_t i = 0; i < dgate.size(); ++i) dedge_pre[i] = dgate[i] * lc.gate[i] * (1.0 - lc.gate[i]);

    // Edge path: e' = e + MLP_e(BN(e-hat)) + MLP_t(t).
    Vec act;
    relu_into(lc.mlp_hidden, act);
    Vec dact;
    net.linear_back(de, act, m, ls.edge_mlp2, grads, &dact, false);
    for (std::size_t i = 0; i < dact.size(); ++i)
      if (!(lc.mlp_hidden[i] > 0.0)) dact[i] = 0.0;
    Vec dbn_out;
    net.linear_back(dact, lc.edge_bn_out, m, ls.edge_mlp1, grads, &dbn_out, false);
    Vec dpre_from_bn;
    batchnorm_backward(dbn_out, m, d, lc.edge_bn, params.tensor(ls.edge_bn_scale), cache.train_mode,
                       grad_of(ls.edge_bn_scale), grad_of(ls.edge_bn_shift), dpre_from_bn);
    add_into(dedge_pre, dpre_from_bn);

    Vec dtt(static_cast<std::size_t>(graphs) * d, 0.0);
    K.segment_sum(de, edges_by_graph, dtt, d);
    relu_into(lc.time_hidden, act);
    Vec dtime_act;
    net.linear_back(dtt, act, graphs, ls.time_mlp2, grads, &dtime_act, false);
    for (std::size_t i = 0; i < dtime_act.size(); ++i)
      if (!(lc.time_hidden[i] > 0.0)) dtime_act[i] = 0.0;
    net.linear_back(dtime_act, cache.time_features, graphs, ls.time_mlp1, grads, nullptr, false);

    // e-hat = P e + Q h_src + R h_dst.
    net.square_back(dedge_pre, lc.e_in, m, ls.P, grads, de_in);
    Vec dqh(static_cast<std::size_t>(n) * d, 0.0);
    Vec drh(static_cast<std::size_t>(n) * d, 0.0);
    K.segment_sum(dedge_pre, batch.by_src, dqh, d);
    K.segment_sum(dedge_pre, batch.by_dst, drh, d);
    net.square_back(dqh, lc.h_in, n, ls.Q, grads, dh_in);
    net.square_back(drh, lc.h_in, n, ls.R, grads, dh_in);

    dh = std::move(dh_in);
    de = std::move(de_in);
  }

  net.linear_back(dh, cache.node_features, n, layout.node_input, grads, nullptr, false);
  if (cfg.task == Task::Tsp) net.linear_back(de, cache.edge_features, m, layout.edge_input, grads, nullptr, false);
  return grads;
}

void update_running_stats(DenoiserParams& params, const ForwardCache& cache, double momentum) {
  if (!cache.train_mode) throw std::logic_error("update_running_stats: cache is not from a training forward");
  if (cache.params != &params || cache.version != params.version)
    throw std::logic_error("update_running_stats: stale forward cache");
  const bool has_edges = cache.batch->num_edges() > 0;
  for (int l = 0; l < params.config.layers; ++l) {
    const LayerCache& lc = cache.layers[l];
    auto blend = [&](int which, const Vec& batch_value) {
      auto run = params.running_block(l, which);
      for (std::size_t c = 0; c < run.size(); ++c) run[c] = momentum * run[c] + (1.0 - momentum) * batch_value[c];
    };
    if (has_edges) {
      blend(0, lc.edge_mean);
      blend(1, lc.edge_var);
    }
    blend(2, lc.node_mean);
    blend(3, lc.node_var);
  }
}

std::vector<CatRow> predict_x0_probs(std::span<const double> outputs, Branch branch) {
  if (branch != Branch::Discrete) throw std::invalid_argument("predict_x0_probs needs a discrete model");
  if (outputs.size() % 2 != 0) throw std::invalid_argument("predict_x0_probs: expected pairs of logits");
  std::vector<CatRow> out(outputs.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double p1 = 1.0 / (1.0 + std::exp(outputs[2 * i] - outputs[2 * i + 1]));
    out[i] = {1.0 - p1, p1};
  }
  return out;
}

std::vector<double> predict_eps(std::span<const double> outputs, Branch branch) {
  if (branch != Branch::Continuous) throw std::invalid_argument("predict_eps needs a continuous model");
  return {outputs.begin(), outputs.end()};
}

}  // namespace gdiff
