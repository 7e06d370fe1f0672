#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cmzdril/pendulum_world.hpp"
#include "cmzdril/ppo.hpp"
#include "cmzdril/waypoint_world.hpp"
#include "test_helpers.hpp"

using namespace cmzdril;

namespace {

Trajectory make_trajectory(const Mat& obs, const Mat& act, const Vec& rewards,
                           const Vec& log_probs, const Vec& values,
                           bool done_at_end, const Vec& next_obs = Vec()) {
  Trajectory traj;
  traj.observations = obs;
  traj.actions = act;
  traj.shaped_rewards = rewards;
  traj.true_rewards = rewards;
  traj.log_probs = log_probs;
  traj.values = values;
  traj.done_at_end = done_at_end;
  traj.next_observation = next_obs;
  return traj;
}

}  // namespace

TEST_CASE("gae: lambda zero collapses to one-step TD errors") {
  ValueNet net(2, {4}, 3);
  Rng rng(5);
  const int t_max = 6;
  Mat obs(t_max, 2);
  for (int t = 0; t < t_max; ++t)
    obs.row(t) << rng.uniform(-1, 1), rng.uniform(-1, 1);
  Vec rewards(t_max), values(t_max);
  for (int t = 0; t < t_max; ++t) {
    rewards[t] = rng.uniform(-1, 1);
    values[t] = net.value(Vec(obs.row(t).transpose()));
  }
  Trajectory traj = make_trajectory(obs, Mat::Zero(t_max, 1), rewards,
                                    Vec::Zero(t_max), values, true);
  const GaeResult gae = compute_gae(traj, net, 0.9, 0.0);
  for (int t = 0; t < t_max; ++t) {
    const double next_value = t + 1 < t_max ? values[t + 1] : 0.0;
    const double delta = rewards[t] + 0.9 * next_value - values[t];
    CHECK(gae.advantages[t] == doctest::Approx(delta).epsilon(1e-12));
  }
}

TEST_CASE("gae: zero rewards and zero values vanish") {
  ValueNet net(2, {4}, 3);
  const int t_max = 5;
  Trajectory traj = make_trajectory(Mat::Zero(t_max, 2), Mat::Zero(t_max, 1),
                                    Vec::Zero(t_max), Vec::Zero(t_max),
                                    Vec::Zero(t_max), true);
  const GaeResult gae = compute_gae(traj, net, 0.99, 0.95);
  CHECK(gae.advantages.isZero(0.0));
  CHECK(gae.returns.isZero(0.0));
}

TEST_CASE("gae: three-step hand-unrolled recursion") {
  ValueNet net(1, {}, 1);
  net.net().weight(0).value.setZero();
  net.net().bias(0).value.setZero();

  Vec rewards(3), values(3);
  rewards << 1.0, -0.5, 2.0;
  values << 0.3, 0.1, -0.2;
  Trajectory traj = make_trajectory(Mat::Zero(3, 1), Mat::Zero(3, 1), rewards,
                                    Vec::Zero(3), values, true);
  const double discount = 0.9, lambda = 0.8;
  const GaeResult gae = compute_gae(traj, net, discount, lambda);

  // Hand recursion, bottom up.
  const double delta2 = 2.0 + 0.0 - (-0.2);
  const double delta1 = -0.5 + discount * (-0.2) - 0.1;
  const double delta0 = 1.0 + discount * 0.1 - 0.3;
  const double a2 = delta2;
  const double a1 = delta1 + discount * lambda * a2;
  const double a0 = delta0 + discount * lambda * a1;
  CHECK(gae.advantages[2] == doctest::Approx(a2).epsilon(1e-12));
  CHECK(gae.advantages[1] == doctest::Approx(a1).epsilon(1e-12));
  CHECK(gae.advantages[0] == doctest::Approx(a0).epsilon(1e-12));
  CHECK(gae.returns[0] == doctest::Approx(a0 + 0.3).epsilon(1e-12));
}

TEST_CASE("gae: lambda=1, gamma=1, V=0 gives return-to-go") {
  ValueNet net(1, {}, 1);
  net.net().weight(0).value.setZero();
  net.net().bias(0).value.setZero();
  Rng rng(11);
  const int t_max = 20;
  Vec rewards(t_max);
  for (int t = 0; t < t_max; ++t) rewards[t] = rng.uniform(-2.0, 2.0);
  Trajectory traj =
      make_trajectory(Mat::Zero(t_max, 1), Mat::Zero(t_max, 1), rewards,
                      Vec::Zero(t_max), Vec::Zero(t_max), true);
  const GaeResult gae = compute_gae(traj, net, 1.0, 1.0);
  double tail = 0.0;
  for (int t = t_max - 1; t >= 0; --t) {
    tail += rewards[t];
    CHECK(gae.advantages[t] == doctest::Approx(tail).epsilon(1e-12));
  }
}

TEST_CASE("gae: truncated segment bootstraps from the value net") {
  ValueNet net(1, {}, 7);  // value(x) = w*x + b, nonzero
  Vec next_obs(1);
  next_obs << 0.7;
  Vec rewards(2), values(2);
  rewards << 0.5, 0.5;
  values << 0.0, 0.0;
  Trajectory traj = make_trajectory(Mat::Zero(2, 1), Mat::Zero(2, 1), rewards,
                                    Vec::Zero(2), values, false, next_obs);
  const double bootstrap = net.value(next_obs);
  const GaeResult gae = compute_gae(traj, net, 1.0, 0.0);
  CHECK(gae.advantages[1] == doctest::Approx(0.5 + bootstrap).epsilon(1e-12));
}

TEST_CASE("normalize_advantages: zero mean, unit variance") {
  Rng rng(3);
  Vec adv(257);
  for (Eigen::Index i = 0; i < adv.size(); ++i)
    adv[i] = rng.uniform(-4.0, 9.0);
  normalize_advantages(adv);
  CHECK(std::abs(adv.mean()) < 1e-9);
  const double stddev = std::sqrt(adv.squaredNorm() / adv.size());
  CHECK(std::abs(stddev - 1.0) < 1e-6);

  // Constant vector: centered, scale left alone.
  Vec flat = Vec::Constant(64, 3.7);
  normalize_advantages(flat);
  CHECK(flat.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ppo surrogate: gradients match finite differences") {
  Rng seed_rng(808);
  for (int trial = 0; trial < 5; ++trial) {
    GaussianPolicy policy(3, 2, {6, 5}, seed_rng.next_u64());
    Rng data_rng(seed_rng.next_u64());
    policy.set_log_std(Vec::Constant(2, data_rng.uniform(-0.8, 0.3)));

    const int n = 8;
    Mat obs(n, 3), act(n, 2);
    Vec old_lp(n), adv(n);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) obs(i, c) = data_rng.uniform(-1, 1);
      const Vec mu = policy.mean(Vec(obs.row(i).transpose()));
      for (int c = 0; c < 2; ++c)
        act(i, c) = mu[c] + data_rng.uniform(-0.5, 0.5);
      // Old log-probs offset from current so ratios are near but not at 1;
      // keep them away from the clip kink where the FD breaks down.
      old_lp[i] = log_prob(policy, Vec(obs.row(i).transpose()),
                           Vec(act.row(i).transpose())) +
                  data_rng.uniform(-0.05, 0.05);
      adv[i] = data_rng.uniform(-2.0, 2.0);
    }

    const double eps = 0.2, entropy_coef = 0.01;
    const Params params = policy.parameters();
    zero_grads(params);
    (void)ppo_surrogate_backward(policy, obs, act, old_lp, adv, eps,
                                 entropy_coef);
    const auto result = cmzdril::testing::check_gradients(params, [&] {
      return ppo_surrogate_loss(policy, obs, act, old_lp, adv, eps,
                                entropy_coef);
    });
    INFO("worst: ", result.worst_location, " err ", result.worst_error);
    CHECK(result.ok);
  }
}

TEST_CASE("value loss: gradients match finite differences") {
  ValueNet net(3, {6}, 99);
  Rng rng(17);
  Mat obs(6, 3);
  Vec targets(6);
  for (int i = 0; i < 6; ++i) {
    for (int c = 0; c < 3; ++c) obs(i, c) = rng.uniform(-1, 1);
    targets[i] = rng.uniform(-2, 2);
  }
  const Params params = net.parameters();
  zero_grads(params);
  (void)value_loss_backward(net, obs, targets, 1.0);
  ValueNet probe = net;
  const auto result = cmzdril::testing::check_gradients(params, [&] {
    const Vec v = net.value(obs);
    return (v - targets).squaredNorm() / 6.0;
  });
  INFO("worst: ", result.worst_location, " err ", result.worst_error);
  CHECK(result.ok);
}

TEST_CASE("ppo_update: zero advantages leave the policy untouched") {
  GaussianPolicy policy(2, 1, {8}, 5);
  ValueNet value_net(2, {8}, 6);
  const int t_max = 12;
  Mat obs(t_max, 2);
  Rng rng(7);
  for (int t = 0; t < t_max; ++t)
    obs.row(t) << rng.uniform(-1, 1), rng.uniform(-1, 1);
  // Rewards and logged values arranged so advantages and value errors are
  // exactly zero: r = 0, V = 0 net output forced to zero.
  for (int l = 0; l < value_net.net().layer_count(); ++l) {
    value_net.net().weight(l).value.setZero();
    value_net.net().bias(l).value.setZero();
  }
  Mat act(t_max, 1);
  Vec lp(t_max);
  for (int t = 0; t < t_max; ++t) {
    const Vec o = obs.row(t).transpose();
    act(t, 0) = policy.mean(o)[0] + rng.uniform(-0.3, 0.3);
    lp[t] = log_prob(policy, o, Vec(act.row(t).transpose()));
  }
  Trajectory traj = make_trajectory(obs, act, Vec::Zero(t_max), lp,
                                    Vec::Zero(t_max), true);

  const GaussianPolicy before = policy;
  Adam policy_opt(policy.parameters(), {});
  Adam value_opt(value_net.parameters(), {});
  PpoConfig config;
  config.epochs = 3;
  config.minibatch_size = 6;
  config.entropy_coef = 0.0;
  Rng update_rng(9);
  const PpoDiagnostics diag = ppo_update(policy, value_net, policy_opt,
                                         value_opt, {traj}, config, update_rng);

  const auto pa = before.net().parameters();
  const auto pb = policy.net().parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK((pa[i]->value - pb[i]->value).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((before.log_std() - policy.log_std()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(diag.policy_loss == doctest::Approx(0.0));
}

TEST_CASE("ppo_update: positive advantage above the mean pulls mu upward") {
  GaussianPolicy policy(1, 1, {8}, 21);
  ValueNet value_net(1, {8}, 22);
  Vec obs1(1);
  obs1 << 0.5;
  const double mu0 = policy.mean(obs1)[0];

  // Two samples at one state: action above mu rewarded, below punished.
  Mat obs(2, 1), act(2, 1);
  obs << 0.5, 0.5;
  act << mu0 + 0.3, mu0 - 0.3;
  Vec lp(2);
  lp << log_prob(policy, obs1, Vec(act.row(0).transpose())),
      log_prob(policy, obs1, Vec(act.row(1).transpose()));
  Vec rewards(2);
  rewards << 1.0, -1.0;
  Trajectory traj =
      make_trajectory(obs, act, rewards, lp, Vec::Zero(2), true);

  Adam policy_opt(policy.parameters(), {.lr = 1e-2});
  Adam value_opt(value_net.parameters(), {});
  PpoConfig config;
  config.epochs = 1;
  config.minibatch_size = 2;
  config.discount = 0.0;
  config.gae_lambda = 0.0;
  Rng rng(3);
  ppo_update(policy, value_net, policy_opt, value_opt, {traj}, config, rng);
  CHECK(policy.mean(obs1)[0] > mu0);
}

TEST_CASE("ppo_update: diagnostics stay in range on a rollout batch") {
  PendulumWorld env;
  GaussianPolicy policy(3, 1, {16, 16}, 31);
  ValueNet value_net(3, {16, 16}, 32);
  ShaperConfig shaper_cfg;
  shaper_cfg.mode = ShaperMode::TrueEnv;
  RewardShaper shaper(shaper_cfg);
  const auto batch =
      collect_rollouts(env, policy, value_net, shaper, nullptr, 600, 77);

  Adam policy_opt(policy.parameters(), {});
  Adam value_opt(value_net.parameters(), {});
  PpoConfig config;
  config.epochs = 4;
  Rng rng(5);
  const PpoDiagnostics diag = ppo_update(policy, value_net, policy_opt,
                                         value_opt, batch, config, rng);
  CHECK(diag.clip_fraction >= 0.0);
  CHECK(diag.clip_fraction <= 1.0);
  CHECK(diag.kl >= -1e-6);
  CHECK(std::isfinite(diag.policy_loss));
  CHECK(std::isfinite(diag.value_loss));
}

TEST_CASE("collect_rollouts: exact step count and segment structure") {
  WaypointWorld env;
  GaussianPolicy policy(21, 2, {16}, 41);
  ValueNet value_net(21, {16}, 42);
  ShaperConfig cfg;
  cfg.mode = ShaperMode::Zero;
  RewardShaper shaper(cfg);
  const auto batch =
      collect_rollouts(env, policy, value_net, shaper, nullptr, 2048, 11);
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += batch[i].length();
    if (i + 1 < batch.size()) CHECK(batch[i].done_at_end);
    CHECK(batch[i].shaped_rewards.isZero(0.0));   // ZERO shaper
    CHECK_FALSE(batch[i].true_rewards.isZero(0.0));  // true rewards logged
    CHECK(batch[i].log_probs.allFinite());
  }
  CHECK(total == 2048);
  // Truncated tail carries its bootstrap observation.
  if (!batch.back().done_at_end)
    CHECK(batch.back().next_observation.size() == 21);
}

TEST_CASE("collect_rollouts: identical-member ensemble zeroes CMZ rewards") {
  PendulumWorld env;
  GaussianPolicy policy(3, 1, {8}, 51);
  ValueNet value_net(3, {8}, 52);
  GaussianPolicy member(3, 1, {8}, 53);
  Ensemble ensemble;
  ensemble.members = {member, member, member};
  ShaperConfig cfg;
  cfg.mode = ShaperMode::Cmz;
  RewardShaper shaper(cfg);
  const auto batch =
      collect_rollouts(env, policy, value_net, shaper, &ensemble, 300, 13);
  for (const Trajectory& traj : batch)
    CHECK(traj.shaped_rewards.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("collect_rollouts: deterministic for a fixed seed") {
  auto run = [] {
    PendulumWorld env;
    GaussianPolicy policy(3, 1, {8}, 61);
    ValueNet value_net(3, {8}, 62);
    ShaperConfig cfg;
    cfg.mode = ShaperMode::TrueEnv;
    RewardShaper shaper(cfg);
    return collect_rollouts(env, policy, value_net, shaper, nullptr, 500, 19);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].observations == b[i].observations);
    CHECK(a[i].actions == b[i].actions);
    CHECK(a[i].shaped_rewards == b[i].shaped_rewards);
    CHECK(a[i].log_probs == b[i].log_probs);
  }
}
