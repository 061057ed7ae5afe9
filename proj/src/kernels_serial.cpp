#include "gdiff/kernels.hpp"

#include <algorithm>

namespace gdiff::kernels::serial {

void linear_forward(std::span<const double> x, std::span<const double> w, std::span<const double> b,
                    std::span<double> y, int rows, int in, int out) {
  std::vector<double> wt(static_cast<std::size_t>(in) * out);
  for (int o = 0; o < out; ++o)
    for (int i = 0; i < in; ++i) wt[static_cast<std::size_t>(i) * out + o] = w[static_cast<std::size_t>(o) * in + i];
  for (int r = 0; r < rows; ++r) {
    double* yr = y.data() + static_cast<std::size_t>(r) * out;
    const double* xr = x.data() + static_cast<std::size_t>(r) * in;
    if (b.empty())
      std::fill(yr, yr + out, 0.0);
    else
      std::copy(b.begin(), b.end(), yr);
    for (int i = 0; i < in; ++i) {
      const double a = xr[i];
      const double* wi = wt.data() + static_cast<std::size_t>(i) * out;
      for (int o = 0; o < out; ++o) yr[o] += a * wi[o];
    }
  }
}

void linear_backward_input(std::span<const double> dy, std::span<const double> w, std::span<double> dx, int rows,
                           int in, int out, bool accumulate) {
  for (int r = 0; r < rows; ++r) {
    double* dxr = dx.data() + static_cast<std::size_t>(r) * in;
    const double* dyr = dy.data() + static_cast<std::size_t>(r) * out;
    if (!accumulate) std::fill(dxr, dxr + in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double a = dyr[o];
      const double* wo = w.data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) dxr[i] += a * wo[i];
    }
  }
}

void linear_backward_params(std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                            std::span<double> db, int rows, int in, int out) {
  for (int o = 0; o < out; ++o) {
    double* dwo = dw.data() + static_cast<std::size_t>(o) * in;
    double bias = 0.0;
    for (int r = 0; r < rows; ++r) {
      const double a = dy[static_cast<std::size_t>(r) * out + o];
      bias += a;
      const double* xr = x.data() + static_cast<std::size_t>(r) * in;
      for (int i = 0; i < in; ++i) dwo[i] += a * xr[i];
    }
    if (!db.empty()) db[o] += bias;
  }
}

void column_moments(std::span<const double> x, std::span<double> mean, std::span<double> var, int rows, int cols) {
  std::fill(mean.begin(), mean.begin() + cols, 0.0);
  std::fill(var.begin(), var.begin() + cols, 0.0);
  if (rows == 0) return;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) mean[c] += x[static_cast<std::size_t>(r) * cols + c];
  for (int c = 0; c < cols; ++c) mean[c] /= rows;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double dev = x[static_cast<std::size_t>(r) * cols + c] - mean[c];
      var[c] += dev * dev;
    }
  for (int c = 0; c < cols; ++c) var[c] /= rows;
}

void edge_gather(std::span<const double> pe, std::span<const double> qh, std::span<const double> rh,
                 std::span<const int> src, std::span<const int> dst, std::span<double> out, int cols) {
  const std::size_t m = src.size();
  for (std::size_t k = 0; k < m; ++k) {
    const double* p = pe.data() + k * cols;
    const double* q = qh.data() + static_cast<std::size_t>(src[k]) * cols;
    const double* r = rh.data() + static_cast<std::size_t>(dst[k]) * cols;
    double* o = out.data() + k * cols;
    for (int c = 0; c < cols; ++c) o[c] = p[c] + q[c] + r[c];
  }
}

void gated_aggregate(std::span<const double> gate, std::span<const double> vh, const Csr& by_src,
                     std::span<const int> dst, std::span<double> out, int cols) {
  const int n = by_src.groups();
  for (int i = 0; i < n; ++i) {
    double* o = out.data() + static_cast<std::size_t>(i) * cols;
    std::fill(o, o + cols, 0.0);
    for (int p = by_src.offsets[i]; p < by_src.offsets[i + 1]; ++p) {
      const int k = by_src.items[p];
      const double* g = gate.data() + static_cast<std::size_t>(k) * cols;
      const double* v = vh.data() + static_cast<std::size_t>(dst[k]) * cols;
      for (int c = 0; c < cols; ++c) o[c] += g[c] * v[c];
    }
  }
}

void gated_aggregate_backward(std::span<const double> dagg, std::span<const double> gate, std::span<const double> vh,
                              std::span<const int> src, std::span<const int> dst, const Csr& by_dst,
                              std::span<double> dgate, std::span<double> dvh, int cols) {
  const std::size_t m = src.size();
  for (std::size_t k = 0; k < m; ++k) {
    const double* a = dagg.data() + static_cast<std::size_t>(src[k]) * cols;
    const double* v = vh.data() + static_cast<std::size_t>(dst[k]) * cols;
    double* g = dgate.data() + k * cols;
    for (int c = 0; c < cols; ++c) g[c] = a[c] * v[c];
  }
  const int n = by_dst.groups();
  for (int j = 0; j < n; ++j) {
    double* o = dvh.data() + static_cast<std::size_t>(j) * cols;
    std::fill(o, o + cols, 0.0);
    for (int p = by_dst.offsets[j]; p < by_dst.offsets[j + 1]; ++p) {
      const int k = by_dst.items[p];
      const double* a = dagg.data() + static_cast<std::size_t>(src[k]) * cols;
      const double* g = gate.data() + static_cast<std::size_t>(k) * cols;
      for (int c = 0; c < cols; ++c) o[c] += a[c] * g[c];
    }
  }
}

void segment_sum(std::span<const double> values, const Csr& groups, std::span<double> out, int cols) {
  const int n = groups.groups();
  for (int i = 0; i < n; ++i) {
    double* o = out.data() + static_cast<std::size_t>(i) * cols;
    for (int p = groups.offsets[i]; p < groups.offsets[i + 1]; ++p) {
      const double* v = values.data() + static_cast<std::size_t>(groups.items[p]) * cols;
      for (int c = 0; c < cols; ++c) o[c] += v[c];
    }
  }
}

}  // namespace gdiff::kernels::serial
