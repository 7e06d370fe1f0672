#pragma once

#include <cstdint>
#include <vector>

#include "cmzdril/adam.hpp"
#include "cmzdril/env.hpp"
#include "cmzdril/imitation.hpp"
#include "cmzdril/mlp.hpp"
#include "cmzdril/policy.hpp"
#include "cmzdril/reward.hpp"

namespace cmzdril {

/// One episode segment collected under a fixed policy. A segment ends either
/// because the episode finished (done_at_end) or because the rollout budget
/// ran out, in which case next_observation carries the bootstrap state.
struct Trajectory {
  Mat observations;   // T x obs_dim
  Mat actions;        // T x act_dim (as sampled, before env clipping)
  Vec shaped_rewards; // training reward from the shaper
  Vec true_rewards;   // environment reward, logged for evaluation only
  Vec log_probs;      // at collection time
  Vec values;         // V(s_t) at collection time
  Vec disagreements;  // ensemble_std(s_t), zero when no ensemble drives it
  bool done_at_end = false;
  Vec next_observation;

  Eigen::Index length() const { return observations.rows(); }
};

struct PpoConfig {
  double discount = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  int epochs = 10;
  int minibatch_size = 64;
  double policy_lr = 1e-3;
  double value_lr = 1e-3;
  double entropy_coef = 0.003;
  double value_coef = 0.5;
  int rollout_steps = 2048;
  // Remaining epochs are skipped once the estimated KL to the rollout policy
  // passes this; <= 0 disables the stop.
  double target_kl = 0.03;
};

struct GaeResult {
  Vec advantages;
  Vec returns;
};

/// Generalized advantage estimation over one segment using its shaped
/// rewards. Bootstraps with 0 when the segment ended an episode, otherwise
/// with value_net(next_observation).
GaeResult compute_gae(const Trajectory& traj, const ValueNet& value_net,
                      double discount, double gae_lambda);

struct PpoDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double kl = 0.0;            // nonnegative estimator mean(r - 1 - log r)
  double clip_fraction = 0.0;
  double mean_shaped_reward = 0.0;
  double mean_true_reward = 0.0;  // per episode, over finished episodes
};

/// Centers advantages; also scales to unit variance unless the variance is
/// below 1e-12.
void normalize_advantages(Vec& advantages);

/// Clipped-surrogate policy objective on one minibatch:
/// mean_i [-min(r_i A_i, clip(r_i) A_i)] - entropy_coef * H(policy).
double ppo_surrogate_loss(const GaussianPolicy& policy, const Mat& obs,
                          const Mat& actions, const Vec& old_log_probs,
                          const Vec& advantages, double clip_epsilon,
                          double entropy_coef);

/// Same objective, accumulating d(loss)/d(params) into the policy's gradient
/// buffers. Throws std::runtime_error on non-finite ratios or loss.
double ppo_surrogate_backward(GaussianPolicy& policy, const Mat& obs,
                              const Mat& actions, const Vec& old_log_probs,
                              const Vec& advantages, double clip_epsilon,
                              double entropy_coef);

/// Mean squared error of value_net against targets, accumulating gradients
/// scaled by `grad_scale` (the value-loss coefficient).
double value_loss_backward(ValueNet& value_net, const Mat& obs,
                           const Vec& targets, double grad_scale);

/// Clipped-surrogate PPO update: for each epoch, shuffled minibatches
/// maximize min(r*A, clip(r, 1-eps, 1+eps)*A) + entropy bonus, with the value
/// net regressed on the GAE returns. Advantages are normalized across the
/// whole update. Throws std::runtime_error on non-finite ratios or losses.
PpoDiagnostics ppo_update(GaussianPolicy& policy, ValueNet& value_net,
                          Adam& policy_opt, Adam& value_opt,
                          const std::vector<Trajectory>& batch,
                          const PpoConfig& config, Rng& rng);

/// Steps the environment with sampled actions for exactly n_steps, resetting
/// episodes (and the shaper's running average) as they finish. Episode e of
/// the collection resets with a seed derived from (seed, e). The uncertainty
/// fed to the shaper is ensemble_std(obs), or 0 when no ensemble is given.
std::vector<Trajectory> collect_rollouts(Env& env,
                                         const GaussianPolicy& policy,
                                         const ValueNet& value_net,
                                         RewardShaper& shaper,
                                         const Ensemble* ensemble, int n_steps,
                                         std::uint64_t seed);

}  // namespace cmzdril
