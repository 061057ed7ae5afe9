#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gdiff/common.hpp"

namespace gdiff {

/// Row-stochastic 2x2 matrix over the states {0, 1}.
using Mat2 = std::array<std::array<double, 2>, 2>;
/// Categorical parameters (P(x = 0), P(x = 1)) of one binary variable.
using CatRow = std::array<double, 2>;

Mat2 mat2_identity();
Mat2 operator*(const Mat2& a, const Mat2& b);

/// Per-step corruption ratios and everything derived from them. Timesteps are
/// 1-based; queries at t = 0 return the identity / no-noise values.
class NoiseSchedule {
 public:
  /// beta_t linearly interpolated from beta_first (t = 1) to beta_last (t = T).
  static NoiseSchedule linear(int steps, double beta_first, double beta_last);
  /// Arbitrary per-step ratios, each strictly inside (0, 1).
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_.at(t - 1); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const { return alpha_bar_.at(t); }

  /// One-step transition Q_t.
  Mat2 q(int t) const;
  /// Cumulative Q_1 ... Q_t; identity at t = 0.
  const Mat2& q_bar(int t) const { return q_bar_.at(t); }
  /// Q_{from+1} ... Q_to; identity when from == to.
  Mat2 q_bar_between(int from, int to) const;

 private:
  explicit NoiseSchedule(std::vector<double> betas);

  std::vector<double> betas_;
  std::vector<double> alpha_bar_;  // index 0 .. T
  std::vector<Mat2> q_bar_;        // index 0 .. T
};

enum class ScheduleKind { Linear, Cosine };
ScheduleKind parse_schedule_kind(std::string_view text);

/// Strictly increasing timesteps tau_1 < ... < tau_M = T visited in reverse.
struct InferenceSchedule {
  std::vector<int> timesteps;
  ScheduleKind kind = ScheduleKind::Linear;

  int size() const { return static_cast<int>(timesteps.size()); }
  /// Hops (t, t_prev) in visiting order, ending with (tau_1, 0).
  std::vector<std::pair<int, int>> hops() const;
};

InferenceSchedule make_inference_schedule(int m, int steps, ScheduleKind kind);

enum class StepMode { Sample, Argmax };
enum class ContinuousMode { Ddpm, Ddim };

// Discrete (Bernoulli) branch. Bits are stored as uint8_t 0/1.

std::vector<CatRow> discrete_forward_marginal(std::span<const std::uint8_t> x0, int t,
                                              const NoiseSchedule& sched);
std::vector<std::uint8_t> discrete_forward_sample(std::span<const std::uint8_t> x0, int t,
                                                  const NoiseSchedule& sched, Rng& rng);

/// Mixture posterior sum_x0 q(x_prev | x_t, x0) p(x0) using Q_bar(t_prev, t).
std::vector<CatRow> discrete_posterior(std::span<const std::uint8_t> xt, std::span<const CatRow> x0_probs,
                                       int t_prev, int t, const NoiseSchedule& sched);

/// Draws from (or takes the argmax of) the posterior. Argmax ties go to 0.
std::vector<std::uint8_t> discrete_reverse_step(std::span<const std::uint8_t> xt,
                                                std::span<const CatRow> x0_probs, int t_prev, int t,
                                                const NoiseSchedule& sched, Rng& rng, StepMode mode);

// Continuous (Gaussian) branch over the {-1, 1} rescaling.

std::vector<double> rescale(std::span<const std::uint8_t> x);
/// x_i = 1 iff value_i >= 0.
std::vector<std::uint8_t> quantize(std::span<const double> x0_hat);

struct NoisedContinuous {
  std::vector<double> xt;
  std::vector<double> eps;
};

NoisedContinuous continuous_forward_sample(std::span<const std::uint8_t> x0, int t, const NoiseSchedule& sched,
                                           Rng& rng);
/// Same, starting from an already rescaled real vector.
NoisedContinuous continuous_forward_sample(std::span<const double> x0_hat, int t, const NoiseSchedule& sched,
                                           Rng& rng);

/// (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)
std::vector<double> predict_x0_from_eps(std::span<const double> xt, std::span<const double> eps, int t,
                                        const NoiseSchedule& sched);

struct GaussianPosterior {
  double mean_coef_x0 = 0.0;
  double mean_coef_xt = 0.0;
  double variance = 0.0;
};

/// Closed-form q(x_prev | x_t, x0) coefficients for any 0 <= t_prev < t.
GaussianPosterior gaussian_posterior(int t_prev, int t, const NoiseSchedule& sched);

std::vector<double> continuous_reverse_step(std::span<const double> xt, std::span<const double> pred_eps,
                                            int t_prev, int t, const NoiseSchedule& sched, ContinuousMode mode,
                                            Rng& rng);

}  // namespace gdiff
