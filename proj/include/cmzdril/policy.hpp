#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cmzdril/mlp.hpp"
#include "cmzdril/rng.hpp"
#include "cmzdril/tensor.hpp"

namespace cmzdril {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

inline const std::vector<int>& default_hidden_dims() {
  static const std::vector<int> dims{64, 64};
  return dims;
}

/// Diagonal-Gaussian policy: an MLP maps an observation to the action mean;
/// a state-independent log-std vector (one entry per action dimension) sets
/// the exploration scale. Hidden layers use tanh, output head is linear with
/// a small init gain so initial actions stay near zero.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int obs_dim, int act_dim, const std::vector<int>& hidden,
                 std::uint64_t seed);

  Vec mean(const Vec& obs) const;
  Mat mean(const Mat& obs) const;  // one observation per row

  Vec log_std() const { return log_std_.value.col(0); }
  void set_log_std(const Vec& v);
  Vec sigma() const { return log_std_.value.col(0).array().exp(); }

  /// Clamps log_std in place; trainers call this after each optimizer step.
  void clamp_log_std(double lo = kLogStdMin, double hi = kLogStdMax);

  double entropy() const;

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  Tensor& log_std_tensor() { return log_std_; }

  /// All trainable tensors: layer weights/biases then log_std.
  Params parameters();

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

 private:
  Mlp net_;
  Tensor log_std_;
  int obs_dim_ = 0;
  int act_dim_ = 0;
};

/// Per-dimension Gaussian negative log likelihood, summed over action
/// dimensions: sum_d [ log s_d + 0.5 log(2 pi) + 0.5 ((a_d - m_d)/s_d)^2 ].
double gaussian_nll(const GaussianPolicy& policy, const Vec& obs,
                    const Vec& action);

/// Mean NLL over rows, accumulating d(mean nll)/d(params) into the policy's
/// gradient buffers. Returns the loss value.
double gaussian_nll_backward(GaussianPolicy& policy, const Mat& obs,
                             const Mat& actions);
double gaussian_nll_backward(GaussianPolicy& policy, const Vec& obs,
                             const Vec& action);

double log_prob(const GaussianPolicy& policy, const Vec& obs,
                const Vec& action);

/// Per-row log probabilities for precomputed means.
Vec log_prob_rows(const GaussianPolicy& policy, const Mat& means,
                  const Mat& actions);

/// Draws action = mean + sigma .* z with z ~ N(0, I); returns the action and
/// its log probability (exactly -gaussian_nll at that action).
std::pair<Vec, double> sample_action(const GaussianPolicy& policy,
                                     const Vec& obs, Rng& rng);

bool policies_bitwise_equal(const GaussianPolicy& a, const GaussianPolicy& b);

}  // namespace cmzdril
