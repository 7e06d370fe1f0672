#pragma once

#include <cstdint>
#include <vector>

#include "cmzdril/demos.hpp"
#include "cmzdril/env.hpp"
#include "cmzdril/policy.hpp"
#include "cmzdril/rng.hpp"

namespace cmzdril {

/// Discrete Frechet distance between two point sequences (one point per row)
/// under the Euclidean metric, via the standard O(|a|*|b|) dynamic program.
/// Throws on an empty trace.
double frechet_distance(const Mat& a, const Mat& b);

/// Mean squared error between the policy's deterministic action and the
/// expert action over all pairs and action dimensions.
double action_mse(const GaussianPolicy& policy, const DemoSet& demos);

/// 1-D Gaussian smoothing: kernel truncated at radius ceil(4*sigma),
/// renormalized, reflect padding at the edges. Output length equals input.
std::vector<double> gaussian_smooth(const std::vector<double>& series,
                                    double sigma = 2.0);

/// Held-out evaluation episodes: the expert's traces and observation-action
/// pairs recorded on fixed seeds, so policy rollouts can be paired
/// scenario-for-scenario.
struct EvalReference {
  std::vector<std::uint64_t> seeds;
  std::vector<Mat> expert_traces;
  DemoSet expert_demos;
  double expert_mean_reward = 0.0;
};

EvalReference build_eval_reference(Env& env, int n_episodes,
                                   std::uint64_t seed);

/// Deterministic rollout (action = policy mean) from the given seed; returns
/// the trace, and the total true reward via `total_reward` when non-null.
Mat rollout_trace(Env& env, const GaussianPolicy& policy, std::uint64_t seed,
                  double* total_reward = nullptr);

/// Mean over evaluation episodes of the Frechet distance between the
/// policy's trace and the expert's trace on the same seed.
double eval_frechet(const GaussianPolicy& policy, Env& env,
                    const EvalReference& ref);

/// Mean total true reward over the reference episodes, deterministic actions.
double eval_mean_true_reward(const GaussianPolicy& policy, Env& env,
                             const EvalReference& ref);

/// Mean total true reward of actions drawn uniformly from [-1, 1]^act_dim.
double random_policy_mean_reward(Env& env, int n_episodes, std::uint64_t seed);

}  // namespace cmzdril
