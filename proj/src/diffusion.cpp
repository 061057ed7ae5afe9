#include "gdiff/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace gdiff {
namespace {

void check_step(int t, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps())
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [1, " + std::to_string(sched.steps()) + "]");
}

void check_hop(int t_prev, int t, const NoiseSchedule& sched) {
  check_step(t, sched);
  if (t_prev < 0 || t_prev >= t)
    throw std::out_of_range("need 0 <= t_prev < t, got t_prev=" + std::to_string(t_prev) + " t=" + std::to_string(t));
}

}  // namespace

Mat2 mat2_identity() { return Mat2{{{1.0, 0.0}, {0.0, 1.0}}}; }

Mat2 operator*(const Mat2& a, const Mat2& b) {
  Mat2 c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return c;
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw std::invalid_argument("noise schedule needs at least one step");
  for (double b : betas_)
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("every beta must lie strictly inside (0, 1)");
  const std::size_t steps = betas_.size();
  alpha_bar_.resize(steps + 1);
  q_bar_.resize(steps + 1);
  alpha_bar_[0] = 1.0;
  q_bar_[0] = mat2_identity();
  for (std::size_t t = 1; t <= steps; ++t) {
    alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - betas_[t - 1]);
    q_bar_[t] = q_bar_[t - 1] * q(static_cast<int>(t));
  }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_first, double beta_last) {
  if (steps < 1) throw std::invalid_argument("noise schedule: T must be >= 1");
  if (!(beta_first > 0.0 && beta_first <= beta_last && beta_last < 1.0))
    throw std::invalid_argument("noise schedule: need 0 < beta_1 <= beta_T < 1");
  std::vector<double> betas(steps);
  for (int t = 0; t < steps; ++t)
    betas[t] = steps == 1 ? beta_first : beta_first + (beta_last - beta_first) * t / (steps - 1);
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) { return NoiseSchedule(std::move(betas)); }

Mat2 NoiseSchedule::q(int t) const {
  const double b = beta(t);
  return Mat2{{{1.0 - b, b}, {b, 1.0 - b}}};
}

Mat2 NoiseSchedule::q_bar_between(int from, int to) const {
  if (from < 0 || to > steps() || from > to) throw std::out_of_range("q_bar_between: need 0 <= from <= to <= T");
  Mat2 m = mat2_identity();
  for (int s = from + 1; s <= to; ++s) m = m * q(s);
  return m;
}

ScheduleKind parse_schedule_kind(std::string_view text) {
  if (text == "linear") return ScheduleKind::Linear;
  if (text == "cosine") return ScheduleKind::Cosine;
  throw std::invalid_argument("unknown schedule '" + std::string(text) + "' (expected linear or cosine)");
}

std::vector<std::pair<int, int>> InferenceSchedule::hops() const {
  std::vector<std::pair<int, int>> out;
  for (int i = size() - 1; i >= 0; --i) out.emplace_back(timesteps[i], i > 0 ? timesteps[i - 1] : 0);
  return out;
}

InferenceSchedule make_inference_schedule(int m, int steps, ScheduleKind kind) {
  if (steps < 1 || m < 1 || m > steps)
    throw std::invalid_argument("inference schedule: need 1 <= M <= T (M=" + std::to_string(m) +
                                ", T=" + std::to_string(steps) + ")");
  InferenceSchedule out;
  out.kind = kind;
  if (m == steps) {
    // The only strictly increasing length-T subsequence of [1..T].
    for (int t = 1; t <= steps; ++t) out.timesteps.push_back(t);
    return out;
  }
  for (int i = 1; i <= m; ++i) {
    int t = 0;
    if (kind == ScheduleKind::Linear) {
      // round(i * T / M), halves rounded up
      t = static_cast<int>((2LL * i * steps + m) / (2LL * m));
    } else {
      const double frac = 1.0 - static_cast<double>(i) / m;
      t = static_cast<int>(std::floor(std::cos(frac * std::numbers::pi / 2.0) * steps));
      t = std::max(t, 1);
    }
    if (out.timesteps.empty() || t > out.timesteps.back()) out.timesteps.push_back(t);
  }
  return out;
}

std::vector<CatRow> discrete_forward_marginal(std::span<const std::uint8_t> x0, int t, const NoiseSchedule& sched) {
  check_step(t, sched);
  const Mat2& qb = sched.q_bar(t);
  std::vector<CatRow> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = qb[x0[i] ? 1 : 0];
  return out;
}

std::vector<std::uint8_t> discrete_forward_sample(std::span<const std::uint8_t> x0, int t,
                                                  const NoiseSchedule& sched, Rng& rng) {
  const auto probs = discrete_forward_marginal(x0, t, sched);
  std::vector<std::uint8_t> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = uniform01(rng) < probs[i][1] ? 1 : 0;
  return out;
}

std::vector<CatRow> discrete_posterior(std::span<const std::uint8_t> xt, std::span<const CatRow> x0_probs,
                                       int t_prev, int t, const NoiseSchedule& sched) {
  check_hop(t_prev, t, sched);
  if (xt.size() != x0_probs.size()) throw std::invalid_argument("discrete_posterior: size mismatch");
  const Mat2 hop = sched.q_bar_between(t_prev, t);
  const Mat2& prior = sched.q_bar(t_prev);
  const Mat2& marginal = sched.q_bar(t);
  std::vector<CatRow> out(xt.size());
  for (std::size_t i = 0; i < xt.size(); ++i) {
    const int s = xt[i] ? 1 : 0;
    CatRow row{0.0, 0.0};
    for (int x0 = 0; x0 < 2; ++x0) {
      const double weight = x0_probs[i][x0];
      if (weight == 0.0) continue;
      const double denom = marginal[x0][s];
      if (!(denom > 0.0)) throw std::domain_error("discrete_posterior: zero marginal q(x_t | x_0)");
      for (int k = 0; k < 2; ++k) row[k] += weight * hop[k][s] * prior[x0][k] / denom;
    }
    out[i] = row;
  }
  return out;
}

std::vector<std::uint8_t> discrete_reverse_step(std::span<const std::uint8_t> xt, std::span<const CatRow> x0_probs,
                                                int t_prev, int t, const NoiseSchedule& sched, Rng& rng,
                                                StepMode mode) {
  const auto post = discrete_posterior(xt, x0_probs, t_prev, t, sched);
  std::vector<std::uint8_t> out(xt.size());
  for (std::size_t i = 0; i < xt.size(); ++i) {
    if (mode == StepMode::Argmax)
      out[i] = post[i][1] > post[i][0] ? 1 : 0;
    else
      out[i] = uniform01(rng) < post[i][1] ? 1 : 0;
  }
  return out;
}

std::vector<double> rescale(std::span<const std::uint8_t> x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] ? 1.0 : -1.0;
  return out;
}

std::vector<std::uint8_t> quantize(std::span<const double> x0_hat) {
  std::vector<std::uint8_t> out(x0_hat.size());
  for (std::size_t i = 0; i < x0_hat.size(); ++i) out[i] = x0_hat[i] >= 0.0 ? 1 : 0;
  return out;
}

NoisedContinuous continuous_forward_sample(std::span<const double> x0_hat, int t, const NoiseSchedule& sched,
                                           Rng& rng) {
  check_step(t, sched);
  const double signal = std::sqrt(sched.alpha_bar(t));
  const double noise = std::sqrt(1.0 - sched.alpha_bar(t));
  std::normal_distribution<double> normal(0.0, 1.0);
  NoisedContinuous out;
  out.xt.resize(x0_hat.size());
  out.eps.resize(x0_hat.size());
  for (std::size_t i = 0; i < x0_hat.size(); ++i) {
    out.eps[i] = normal(rng);
    out.xt[i] = signal * x0_hat[i] + noise * out.eps[i];
  }
  return out;
}

NoisedContinuous continuous_forward_sample(std::span<const std::uint8_t> x0, int t, const NoiseSchedule& sched,
                                           Rng& rng) {
  const auto lifted = rescale(x0);
  return continuous_forward_sample(std::span<const double>(lifted), t, sched, rng);
}

std::vector<double> predict_x0_from_eps(std::span<const double> xt, std::span<const double> eps, int t,
                                        const NoiseSchedule& sched) {
  if (xt.size() != eps.size()) throw std::invalid_argument("predict_x0_from_eps: size mismatch");
  const double abar = t == 0 ? 1.0 : sched.alpha_bar(t);
  if (!(abar > 0.0)) throw std::domain_error("predict_x0_from_eps: alpha_bar is zero");
  const double signal = std::sqrt(abar);
  const double noise = std::sqrt(1.0 - abar);
  std::vector<double> out(xt.size());
  for (std::size_t i = 0; i < xt.size(); ++i) out[i] = (xt[i] - noise * eps[i]) / signal;
  return out;
}

GaussianPosterior gaussian_posterior(int t_prev, int t, const NoiseSchedule& sched) {
  check_hop(t_prev, t, sched);
  const double abar_t = sched.alpha_bar(t);
  const double abar_p = sched.alpha_bar(t_prev);
  const double hop_alpha = abar_t / abar_p;
  const double hop_beta = 1.0 - hop_alpha;
  GaussianPosterior post;
  post.mean_coef_x0 = std::sqrt(abar_p) * hop_beta / (1.0 - abar_t);
  post.mean_coef_xt = std::sqrt(hop_alpha) * (1.0 - abar_p) / (1.0 - abar_t);
  post.variance = (1.0 - abar_p) / (1.0 - abar_t) * hop_beta;
  return post;
}

std::vector<double> continuous_reverse_step(std::span<const double> xt, std::span<const double> pred_eps,
                                            int t_prev, int t, const NoiseSchedule& sched, ContinuousMode mode,
                                            Rng& rng) {
  check_hop(t_prev, t, sched);
  const auto x0 = predict_x0_from_eps(xt, pred_eps, t, sched);
  std::vector<double> out(xt.size());
  if (mode == ContinuousMode::Ddim) {
    const double signal = std::sqrt(sched.alpha_bar(t_prev));
    const double noise = std::sqrt(1.0 - sched.alpha_bar(t_prev));
    for (std::size_t i = 0; i < xt.size(); ++i) out[i] = signal * x0[i] + noise * pred_eps[i];
    return out;
  }
  const GaussianPosterior post = gaussian_posterior(t_prev, t, sched);
  const double sd = std::sqrt(post.variance);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < xt.size(); ++i) {
    out[i] = post.mean_coef_x0 * x0[i] + post.mean_coef_xt * xt[i];
    if (t_prev > 0) out[i] += sd * normal(rng);
  }
  return out;
}

}  // namespace gdiff
