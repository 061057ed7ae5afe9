#pragma once

#include <span>
#include <vector>

// Dense and graph kernels used by the denoiser. Two implementations share one
// interface: `serial` is the plain reference, `omp` the OpenMP-parallel one.
// Every output element is accumulated in the same order by both, so results
// agree bit-for-bit regardless of thread count.
//
// Matrices are row-major. A linear map with weight W (out x in) computes
// y = x W^T + b; an empty b means no bias.

namespace gdiff::kernels {

/// Compressed adjacency: group i is items[offsets[i] .. offsets[i+1]).
struct Csr {
  std::vector<int> offsets;
  std::vector<int> items;

  int groups() const { return offsets.empty() ? 0 : static_cast<int>(offsets.size()) - 1; }
};

// linear_forward           y = x W^T + b
// linear_backward_input    dx (+)= dy W
// linear_backward_params   dW += dy^T x, db += column sums of dy
// column_moments           per-column mean and biased variance
// edge_gather              out[k] = pe[k] + qh[src[k]] + rh[dst[k]]
// gated_aggregate          out[i] = sum over edges k leaving i of gate[k] * vh[dst[k]]
// gated_aggregate_backward dgate[k] = dagg[src[k]] * vh[dst[k]],
//                          dvh[j] = sum over edges k entering j of dagg[src[k]] * gate[k]
// segment_sum              out[i] += sum of values[item] over group i

namespace serial {
void linear_forward(std::span<const double> x, std::span<const double> w, std::span<const double> b,
                    std::span<double> y, int rows, int in, int out);
void linear_backward_input(std::span<const double> dy, std::span<const double> w, std::span<double> dx, int rows,
                           int in, int out, bool accumulate);
void linear_backward_params(std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                            std::span<double> db, int rows, int in, int out);
void column_moments(std::span<const double> x, std::span<double> mean, std::span<double> var, int rows, int cols);
void edge_gather(std::span<const double> pe, std::span<const double> qh, std::span<const double> rh,
                 std::span<const int> src, std::span<const int> dst, std::span<double> out, int cols);
void gated_aggregate(std::span<const double> gate, std::span<const double> vh, const Csr& by_src,
                     std::span<const int> dst, std::span<double> out, int cols);
void gated_aggregate_backward(std::span<const double> dagg, std::span<const double> gate, std::span<const double> vh,
                              std::span<const int> src, std::span<const int> dst, const Csr& by_dst,
                              std::span<double> dgate, std::span<double> dvh, int cols);
void segment_sum(std::span<const double> values, const Csr& groups, std::span<double> out, int cols);
}  // namespace serial

namespace omp {
void linear_forward(std::span<const double> x, std::span<const double> w, std::span<const double> b,
                    std::span<double> y, int rows, int in, int out);
void linear_backward_input(std::span<const double> dy, std::span<const double> w, std::span<double> dx, int rows,
                           int in, int out, bool accumulate);
void linear_backward_params(std::span<const double> dy, std::span<const double> x, std::span<double> dw,
                            std::span<double> db, int rows, int in, int out);
void column_moments(std::span<const double> x, std::span<double> mean, std::span<double> var, int rows, int cols);
void edge_gather(std::span<const double> pe, std::span<const double> qh, std::span<const double> rh,
                 std::span<const int> src, std::span<const int> dst, std::span<double> out, int cols);
void gated_aggregate(std::span<const double> gate, std::span<const double> vh, const Csr& by_src,
                     std::span<const int> dst, std::span<double> out, int cols);
void gated_aggregate_backward(std::span<const double> dagg, std::span<const double> gate, std::span<const double> vh,
                              std::span<const int> src, std::span<const int> dst, const Csr& by_dst,
                              std::span<double> dgate, std::span<double> dvh, int cols);
void segment_sum(std::span<const double> values, const Csr& groups, std::span<double> out, int cols);
}  // namespace omp

void set_num_threads(int threads);
int max_threads();

}  // namespace gdiff::kernels

namespace gdiff::kernels {

enum class Backend { Serial, Omp };

/// Function table for one backend, so callers can switch implementations.
struct KernelSet {
  decltype(&serial::linear_forward) linear_forward;
  decltype(&serial::linear_backward_input) linear_backward_input;
  decltype(&serial::linear_backward_params) linear_backward_params;
  decltype(&serial::column_moments) column_moments;
  decltype(&serial::edge_gather) edge_gather;
  decltype(&serial::gated_aggregate) gated_aggregate;
  decltype(&serial::gated_aggregate_backward) gated_aggregate_backward;
  decltype(&serial::segment_sum) segment_sum;
};

const KernelSet& kernel_set(Backend backend);

}  // namespace gdiff::kernels
