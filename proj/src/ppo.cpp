#include "cmzdril/ppo.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cmzdril {

GaeResult compute_gae(const Trajectory& traj, const ValueNet& value_net,
                      double discount, double gae_lambda) {
  const Eigen::Index t_max = traj.length();
  if (t_max == 0) throw std::invalid_argument("compute_gae: empty trajectory");

  GaeResult out;
  out.advantages.resize(t_max);
  out.returns.resize(t_max);

  double next_value =
      traj.done_at_end ? 0.0 : value_net.value(traj.next_observation);
  double next_advantage = 0.0;
  for (Eigen::Index t = t_max - 1; t >= 0; --t) {
    const double not_done =
        (t == t_max - 1 && traj.done_at_end) ? 0.0 : 1.0;
    const double delta = traj.shaped_rewards[t] +
                         discount * next_value * not_done - traj.values[t];
    out.advantages[t] =
        delta + discount * gae_lambda * not_done * next_advantage;
    next_value = traj.values[t];
    next_advantage = out.advantages[t];
  }
  out.returns = out.advantages + traj.values;
  return out;
}

namespace {

struct FlatBatch {
  Mat observations;
  Mat actions;
  Vec old_log_probs;
  Vec advantages;
  Vec returns;
  Eigen::Index size = 0;
};

FlatBatch flatten(const std::vector<Trajectory>& batch,
                  const ValueNet& value_net, const PpoConfig& config) {
  Eigen::Index total = 0;
  for (const Trajectory& traj : batch) total += traj.length();
  if (total == 0) throw std::invalid_argument("ppo_update: empty batch");

  const Eigen::Index obs_dim = batch.front().observations.cols();
  const Eigen::Index act_dim = batch.front().actions.cols();
  FlatBatch flat;
  flat.observations.resize(total, obs_dim);
  flat.actions.resize(total, act_dim);
  flat.old_log_probs.resize(total);
  flat.advantages.resize(total);
  flat.returns.resize(total);
  flat.size = total;

  Eigen::Index row = 0;
  for (const Trajectory& traj : batch) {
    const GaeResult gae =
        compute_gae(traj, value_net, config.discount, config.gae_lambda);
    const Eigen::Index len = traj.length();
    flat.observations.middleRows(row, len) = traj.observations;
    flat.actions.middleRows(row, len) = traj.actions;
    flat.old_log_probs.segment(row, len) = traj.log_probs;
    flat.advantages.segment(row, len) = gae.advantages;
    flat.returns.segment(row, len) = gae.returns;
    row += len;
  }
  return flat;
}

}  // namespace

void normalize_advantages(Vec& advantages) {
  const double mean = advantages.mean();
  advantages.array() -= mean;
  const double variance = advantages.squaredNorm() /
                          static_cast<double>(advantages.size());
  if (variance >= 1e-12) advantages /= std::sqrt(variance);
}

double ppo_surrogate_loss(const GaussianPolicy& policy, const Mat& obs,
                          const Mat& actions, const Vec& old_log_probs,
                          const Vec& advantages, double clip_epsilon,
                          double entropy_coef) {
  const Mat means = policy.mean(obs);
  const Vec new_lp = log_prob_rows(policy, means, actions);
  const Vec ratio = (new_lp - old_log_probs).array().exp();
  const Vec unclipped = ratio.array() * advantages.array();
  const Vec clipped = ratio.array().max(1.0 - clip_epsilon).min(
                          1.0 + clip_epsilon) *
                      advantages.array();
  return -unclipped.array().min(clipped.array()).mean() -
         entropy_coef * policy.entropy();
}

double ppo_surrogate_backward(GaussianPolicy& policy, const Mat& obs,
                              const Mat& actions, const Vec& old_log_probs,
                              const Vec& advantages, double clip_epsilon,
                              double entropy_coef) {
  const Eigen::Index count = obs.rows();
  MlpCache cache;
  const Mat means = policy.net().forward(obs, cache);
  const Vec new_lp = log_prob_rows(policy, means, actions);
  const Vec ratio = (new_lp - old_log_probs).array().exp();
  if (!ratio.allFinite())
    throw std::runtime_error("ppo_update: non-finite probability ratio");

  const Vec unclipped = ratio.array() * advantages.array();
  const Vec clipped = ratio.array().max(1.0 - clip_epsilon).min(
                          1.0 + clip_epsilon) *
                      advantages.array();
  const Vec surrogate = unclipped.array().min(clipped.array());
  const double loss = -surrogate.mean() - entropy_coef * policy.entropy();
  if (!std::isfinite(loss))
    throw std::runtime_error("ppo_update: non-finite policy loss");

  // d(loss)/d(new_logp): gradient flows only where the unclipped branch is
  // the active minimum.
  Vec grad_lp(count);
  for (Eigen::Index i = 0; i < count; ++i)
    grad_lp[i] = unclipped[i] <= clipped[i]
                     ? -advantages[i] * ratio[i] / static_cast<double>(count)
                     : 0.0;

  // d(logp)/d(mu) = (a - mu)/s^2 and d(logp)/d(log_std) = z^2 - 1.
  const Vec inv_var = policy.sigma().array().square().inverse();
  const Mat resid = actions - means;
  Mat grad_means = resid.array().rowwise() * inv_var.transpose().array();
  grad_means.array().colwise() *= grad_lp.array();
  policy.net().backward(cache, grad_means);

  const Mat z2 = resid.array().square().rowwise() * inv_var.transpose().array();
  const Eigen::RowVectorXd weighted_z2 =
      (z2.array().colwise() * grad_lp.array()).matrix().colwise().sum();
  const Vec grad_log_std =
      (weighted_z2.transpose().array() - grad_lp.sum() - entropy_coef)
          .matrix();
  policy.log_std_tensor().grad.col(0) += grad_log_std;
  return loss;
}

double value_loss_backward(ValueNet& value_net, const Mat& obs,
                           const Vec& targets, double grad_scale) {
  const Eigen::Index count = obs.rows();
  MlpCache cache;
  const Vec predicted = value_net.net().forward(obs, cache).col(0);
  const Vec error = predicted - targets;
  const double loss = error.squaredNorm() / static_cast<double>(count);
  if (!std::isfinite(loss))
    throw std::runtime_error("ppo_update: non-finite value loss");
  const Mat grad = (grad_scale * 2.0 / static_cast<double>(count)) * error;
  value_net.net().backward(cache, grad);
  return loss;
}

PpoDiagnostics ppo_update(GaussianPolicy& policy, ValueNet& value_net,
                          Adam& policy_opt, Adam& value_opt,
                          const std::vector<Trajectory>& batch,
                          const PpoConfig& config, Rng& rng) {
  FlatBatch flat = flatten(batch, value_net, config);
  normalize_advantages(flat.advantages);

  const Eigen::Index n = flat.size;
  const double eps = config.clip_epsilon;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  double policy_loss_sum = 0.0;
  double value_loss_sum = 0.0;
  long pass_count = 0;

  const auto estimate_kl = [&] {
    const Mat means = policy.mean(flat.observations);
    const Vec lp = log_prob_rows(policy, means, flat.actions);
    const Vec log_ratio = lp - flat.old_log_probs;
    return (log_ratio.array().exp() - 1.0 - log_ratio.array()).mean();
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.target_kl > 0.0 && epoch > 0 &&
        estimate_kl() > config.target_kl)
      break;
    rng.shuffle(order);
    for (Eigen::Index start = 0; start < n;
         start += config.minibatch_size) {
      const Eigen::Index count =
          std::min<Eigen::Index>(config.minibatch_size, n - start);
      Mat obs(count, flat.observations.cols());
      Mat act(count, flat.actions.cols());
      Vec old_lp(count), adv(count), ret(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        const int src = order[static_cast<std::size_t>(start + i)];
        obs.row(i) = flat.observations.row(src);
        act.row(i) = flat.actions.row(src);
        old_lp[i] = flat.old_log_probs[src];
        adv[i] = flat.advantages[src];
        ret[i] = flat.returns[src];
      }

      policy_opt.zero_grad();
      const double policy_loss = ppo_surrogate_backward(
          policy, obs, act, old_lp, adv, eps, config.entropy_coef);
      policy_opt.step();
      policy.clamp_log_std();

      value_opt.zero_grad();
      const double value_loss =
          value_loss_backward(value_net, obs, ret, config.value_coef);
      value_opt.step();

      policy_loss_sum += policy_loss;
      value_loss_sum += value_loss;
      ++pass_count;
    }
  }

  PpoDiagnostics diag;
  diag.policy_loss = policy_loss_sum / pass_count;
  diag.value_loss = value_loss_sum / pass_count;

  // Post-update KL and clip statistics on the full batch.
  const Mat final_means = policy.mean(flat.observations);
  const Vec final_lp = log_prob_rows(policy, final_means, flat.actions);
  const Vec log_ratio = final_lp - flat.old_log_probs;
  const Vec ratio = log_ratio.array().exp();
  if (!ratio.allFinite())
    throw std::runtime_error("ppo_update: non-finite post-update ratio");
  diag.kl = (ratio.array() - 1.0 - log_ratio.array()).mean();
  diag.clip_fraction =
      ((ratio.array() - 1.0).abs() > eps).cast<double>().mean();

  double shaped_sum = 0.0;
  double true_sum = 0.0;
  int finished = 0;
  for (const Trajectory& traj : batch) {
    shaped_sum += traj.shaped_rewards.sum();
    if (traj.done_at_end) {
      true_sum += traj.true_rewards.sum();
      ++finished;
    }
  }
  diag.mean_shaped_reward = shaped_sum / static_cast<double>(n);
  diag.mean_true_reward = finished > 0 ? true_sum / finished : 0.0;
  return diag;
}

std::vector<Trajectory> collect_rollouts(Env& env,
                                         const GaussianPolicy& policy,
                                         const ValueNet& value_net,
                                         RewardShaper& shaper,
                                         const Ensemble* ensemble, int n_steps,
                                         std::uint64_t seed) {
  if (n_steps < 1)
    throw std::invalid_argument("collect_rollouts: n_steps must be >= 1");

  Rng action_rng(derive_seed(seed, 0, "rollout-actions"));
  std::uint64_t episode = 0;
  Vec obs = env.reset(derive_seed(seed, episode, "rollout-episode"));
  shaper.reset_episode();

  std::vector<Trajectory> out;
  std::vector<Vec> obs_rows, act_rows;
  std::vector<double> shaped, true_r, log_probs, values, disagreements;

  const auto finalize = [&](bool done_at_end, const Vec& next_obs) {
    if (obs_rows.empty()) return;
    Trajectory traj;
    const auto t = static_cast<Eigen::Index>(obs_rows.size());
    traj.observations.resize(t, env.obs_dim());
    traj.actions.resize(t, env.act_dim());
    traj.shaped_rewards.resize(t);
    traj.true_rewards.resize(t);
    traj.log_probs.resize(t);
    traj.values.resize(t);
    traj.disagreements.resize(t);
    for (Eigen::Index i = 0; i < t; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      traj.observations.row(i) = obs_rows[idx];
      traj.actions.row(i) = act_rows[idx];
      traj.shaped_rewards[i] = shaped[idx];
      traj.true_rewards[i] = true_r[idx];
      traj.log_probs[i] = log_probs[idx];
      traj.values[i] = values[idx];
      traj.disagreements[i] = disagreements[idx];
    }
    traj.done_at_end = done_at_end;
    if (!done_at_end) traj.next_observation = next_obs;
    out.push_back(std::move(traj));
    obs_rows.clear();
    act_rows.clear();
    shaped.clear();
    true_r.clear();
    log_probs.clear();
    values.clear();
    disagreements.clear();
  };

  for (int step = 0; step < n_steps; ++step) {
    const double u = ensemble ? ensemble_std(*ensemble, obs) : 0.0;
    const double value = value_net.value(obs);
    auto [action, lp] = sample_action(policy, obs, action_rng);
    const EnvStep env_step = env.step(action);
    obs_rows.push_back(obs);
    act_rows.push_back(action);
    shaped.push_back(shaper.shape(env_step.reward, u));
    true_r.push_back(env_step.reward);
    log_probs.push_back(lp);
    values.push_back(value);
    disagreements.push_back(u);

    if (env_step.done) {
      finalize(true, Vec());
      ++episode;
      obs = env.reset(derive_seed(seed, episode, "rollout-episode"));
      shaper.reset_episode();
    } else {
      obs = env_step.observation;
    }
  }
  finalize(false, obs);
  return out;
}

}  // namespace cmzdril
