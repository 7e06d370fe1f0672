#include "cmzdril/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmzdril {

double frechet_distance(const Mat& a, const Mat& b) {
  if (a.rows() == 0 || b.rows() == 0)
    throw std::invalid_argument("frechet_distance: empty trace");
  if (a.cols() != b.cols())
    throw std::invalid_argument("frechet_distance: point dimension mismatch");

  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  Mat coupling(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = (a.row(i) - b.row(j)).norm();
      if (i == 0 && j == 0)
        coupling(i, j) = d;
      else if (i == 0)
        coupling(i, j) = std::max(coupling(i, j - 1), d);
      else if (j == 0)
        coupling(i, j) = std::max(coupling(i - 1, j), d);
      else
        coupling(i, j) =
            std::max(std::min({coupling(i - 1, j), coupling(i, j - 1),
                               coupling(i - 1, j - 1)}),
                     d);
    }
  }
  return coupling(n - 1, m - 1);
}

double action_mse(const GaussianPolicy& policy, const DemoSet& demos) {
  if (demos.empty()) throw std::invalid_argument("action_mse: empty demos");
  if (demos.obs_dim != policy.obs_dim() || demos.act_dim != policy.act_dim())
    throw std::invalid_argument("action_mse: dimension mismatch");
  double sum = 0.0;
  long count = 0;
  for (const Episode& ep : demos.episodes) {
    const Mat predicted = policy.mean(ep.observations);
    sum += (predicted - ep.actions).array().square().sum();
    count += ep.actions.size();
  }
  return sum / static_cast<double>(count);
}

std::vector<double> gaussian_smooth(const std::vector<double>& series,
                                    double sigma) {
  if (series.empty())
    throw std::invalid_argument("gaussian_smooth: empty series");
  if (sigma <= 0.0) return series;

  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * k * k / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    norm += w;
  }
  for (double& w : kernel) w /= norm;

  const int n = static_cast<int>(series.size());
  // Reflect padding: index -1 maps to 0, index n maps to n-1.
  const auto reflect = [n](int i) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };

  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = -radius; k <= radius; ++k)
      acc += kernel[static_cast<std::size_t>(k + radius)] *
             series[static_cast<std::size_t>(reflect(i + k))];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

EvalReference build_eval_reference(Env& env, int n_episodes,
                                   std::uint64_t seed) {
  if (n_episodes < 1)
    throw std::invalid_argument("build_eval_reference: need >= 1 episode");
  EvalReference ref;
  ref.expert_demos.env_name = env.name();
  ref.expert_demos.obs_dim = env.obs_dim();
  ref.expert_demos.act_dim = env.act_dim();
  double reward_sum = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    const std::uint64_t ep_seed =
        derive_seed(seed, static_cast<std::uint64_t>(e), "eval-episode");
    ref.seeds.push_back(ep_seed);
    Vec obs = env.reset(ep_seed);
    std::vector<Eigen::Vector2d> trace;
    std::vector<Vec> obs_rows, act_rows;
    trace.push_back(env.trace_point());
    double total = 0.0;
    while (!env.done()) {
      const Vec action = env.expert_action();
      obs_rows.push_back(obs);
      act_rows.push_back(action);
      const EnvStep step = env.step(action);
      obs = step.observation;
      total += step.reward;
      trace.push_back(env.trace_point());
    }
    reward_sum += total;

    Mat trace_mat(static_cast<Eigen::Index>(trace.size()), 2);
    for (std::size_t i = 0; i < trace.size(); ++i)
      trace_mat.row(static_cast<Eigen::Index>(i)) = trace[i].transpose();
    ref.expert_traces.push_back(std::move(trace_mat));

    Episode ep;
    ep.seed = ep_seed;
    ep.observations.resize(static_cast<Eigen::Index>(obs_rows.size()),
                           env.obs_dim());
    ep.actions.resize(static_cast<Eigen::Index>(act_rows.size()),
                      env.act_dim());
    for (std::size_t i = 0; i < obs_rows.size(); ++i) {
      ep.observations.row(static_cast<Eigen::Index>(i)) = obs_rows[i];
      ep.actions.row(static_cast<Eigen::Index>(i)) = act_rows[i];
    }
    ref.expert_demos.episodes.push_back(std::move(ep));
  }
  ref.expert_mean_reward = reward_sum / n_episodes;
  return ref;
}

Mat rollout_trace(Env& env, const GaussianPolicy& policy, std::uint64_t seed,
                  double* total_reward) {
  Vec obs = env.reset(seed);
  std::vector<Eigen::Vector2d> trace;
  trace.push_back(env.trace_point());
  double total = 0.0;
  while (!env.done()) {
    const Vec action = policy.mean(obs).array().max(-1.0).min(1.0);
    const EnvStep step = env.step(action);
    obs = step.observation;
    total += step.reward;
    trace.push_back(env.trace_point());
  }
  if (total_reward) *total_reward = total;
  Mat out(static_cast<Eigen::Index>(trace.size()), 2);
  for (std::size_t i = 0; i < trace.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = trace[i].transpose();
  return out;
}

double eval_frechet(const GaussianPolicy& policy, Env& env,
                    const EvalReference& ref) {
  if (ref.seeds.empty())
    throw std::invalid_argument("eval_frechet: empty evaluation reference");
  if (ref.seeds.size() != ref.expert_traces.size())
    throw std::runtime_error("eval_frechet: reference seeds/traces mismatch");
  double sum = 0.0;
  for (std::size_t e = 0; e < ref.seeds.size(); ++e) {
    const Mat trace = rollout_trace(env, policy, ref.seeds[e]);
    sum += frechet_distance(trace, ref.expert_traces[e]);
  }
  return sum / static_cast<double>(ref.seeds.size());
}

double eval_mean_true_reward(const GaussianPolicy& policy, Env& env,
                             const EvalReference& ref) {
  if (ref.seeds.empty())
    throw std::invalid_argument("eval_mean_true_reward: empty reference");
  double sum = 0.0;
  for (const std::uint64_t seed : ref.seeds) {
    double total = 0.0;
    rollout_trace(env, policy, seed, &total);
    sum += total;
  }
  return sum / static_cast<double>(ref.seeds.size());
}

double random_policy_mean_reward(Env& env, int n_episodes,
                                 std::uint64_t seed) {
  Rng rng(seed);
  double sum = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    env.reset(derive_seed(seed, static_cast<std::uint64_t>(e), "random-eval"));
    double total = 0.0;
    while (!env.done()) {
      Vec action(env.act_dim());
      for (Eigen::Index d = 0; d < action.size(); ++d)
        action[d] = rng.uniform(-1.0, 1.0);
      total += env.step(action).reward;
    }
    sum += total;
  }
  return sum / n_episodes;
}

}  // namespace cmzdril
