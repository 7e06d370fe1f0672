#include "cmzdril/imitation.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cmzdril/adam.hpp"
#include "cmzdril/checkpoint.hpp"
#include "cmzdril/rng.hpp"

namespace cmzdril {

double nll_epoch(GaussianPolicy& policy, const Mat& observations,
                 const Mat& actions, Adam& optimizer, Rng& rng,
                 const BcConfig& config) {
  const int n = static_cast<int>(observations.rows());
  const bool full_batch = n < config.full_batch_threshold;
  const int batch = full_batch ? n : config.batch_size;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (!full_batch) rng.shuffle(order);

  double epoch_loss = 0.0;
  int seen = 0;
  for (int start = 0; start < n; start += batch) {
    const int count = std::min(batch, n - start);
    Mat obs(count, observations.cols());
    Mat act(count, actions.cols());
    for (int i = 0; i < count; ++i) {
      obs.row(i) = observations.row(order[static_cast<std::size_t>(start + i)]);
      act.row(i) = actions.row(order[static_cast<std::size_t>(start + i)]);
    }
    optimizer.zero_grad();
    const double loss = gaussian_nll_backward(policy, obs, act);
    optimizer.step();
    policy.clamp_log_std();
    epoch_loss += loss * count;
    seen += count;
  }
  return epoch_loss / seen;
}

std::vector<double> bc_train(GaussianPolicy& policy, const DemoSet& demos,
                             const BcConfig& config, std::uint64_t seed) {
  if (demos.empty())
    throw std::invalid_argument("bc_train: empty demonstration set");
  if (demos.obs_dim != policy.obs_dim() || demos.act_dim != policy.act_dim())
    throw std::invalid_argument("bc_train: policy/demo dimension mismatch");

  const Mat all_obs = demos.stacked_observations();
  const Mat all_act = demos.stacked_actions();
  Adam optimizer(policy.parameters(), {.lr = config.lr});
  Rng rng(derive_seed(seed, 0, "bc-shuffle"));

  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch)
    curve.push_back(nll_epoch(policy, all_obs, all_act, optimizer, rng, config));
  return curve;
}

Ensemble train_ensemble(const DemoSet& demos, int k, const BcConfig& config,
                        std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("train_ensemble: K must be >= 2");
  if (demos.empty())
    throw std::invalid_argument("train_ensemble: empty demonstration set");

  Ensemble ensemble;
  const int n_episodes = static_cast<int>(demos.episodes.size());
  for (int member = 0; member < k; ++member) {
    const auto m = static_cast<std::uint64_t>(member);
    Rng resample_rng(derive_seed(seed, m, "ensemble-resample"));
    std::vector<int> picks(static_cast<std::size_t>(n_episodes));
    for (auto& p : picks)
      p = static_cast<int>(resample_rng.uniform_index(
          static_cast<std::uint64_t>(n_episodes)));

    DemoSet bag;
    bag.env_name = demos.env_name;
    bag.obs_dim = demos.obs_dim;
    bag.act_dim = demos.act_dim;
    for (const int idx : picks)
      bag.episodes.push_back(demos.episodes[static_cast<std::size_t>(idx)]);

    // Members cycle through distinct widths: diverse function classes agree
    // where the data pins them and diverge elsewhere, which sharpens the
    // disagreement signal.
    static const std::vector<std::vector<int>> kMemberHidden = {
        {64, 64}, {48, 48}, {80, 80}, {56, 56}, {72, 72}};
    const std::uint64_t init_seed = derive_seed(seed, m, "ensemble-init");
    GaussianPolicy policy(
        demos.obs_dim, demos.act_dim,
        kMemberHidden[static_cast<std::size_t>(member) % kMemberHidden.size()],
        init_seed);
    bc_train(policy, bag, config, derive_seed(seed, m, "ensemble-train"));

    ensemble.members.push_back(std::move(policy));
    ensemble.member_seeds.push_back(init_seed);
    ensemble.resample_indices.push_back(std::move(picks));
  }
  return ensemble;
}

double ensemble_std(const Ensemble& ensemble, const Vec& obs) {
  const int k = ensemble.size();
  if (k < 2) throw std::invalid_argument("ensemble_std: need >= 2 members");
  const int act_dim = ensemble.members.front().act_dim();
  Mat means(k, act_dim);
  for (int i = 0; i < k; ++i)
    means.row(i) = ensemble.members[static_cast<std::size_t>(i)].mean(obs);
  // Exact agreement must read as exactly zero.
  bool all_equal = true;
  for (int i = 1; i < k && all_equal; ++i)
    all_equal = means.row(i) == means.row(0);
  if (all_equal) return 0.0;
  const Eigen::RowVectorXd mean = means.colwise().mean();
  const Eigen::RowVectorXd variance =
      (means.rowwise() - mean).array().square().colwise().mean();
  return variance.array().sqrt().mean();
}

void save_ensemble(const Ensemble& ensemble, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.txt");
  if (!manifest)
    throw std::runtime_error("ensemble: cannot write manifest in " + dir);
  manifest << "cmzdril-ensemble v1\n";
  manifest << "members " << ensemble.size() << '\n';
  for (int i = 0; i < ensemble.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    manifest << "member " << i << " seed " << ensemble.member_seeds[idx]
             << " resample";
    for (const int r : ensemble.resample_indices[idx]) manifest << ' ' << r;
    manifest << '\n';
    char name[32];
    std::snprintf(name, sizeof(name), "member_%03d.ckpt", i);
    save_policy(ensemble.members[idx], dir + "/" + name);
  }
}

Ensemble load_ensemble(const std::string& dir) {
  std::ifstream manifest(dir + "/manifest.txt");
  if (!manifest)
    throw std::runtime_error("ensemble: cannot open manifest in " + dir);
  std::string tok;
  manifest >> tok;
  if (tok != "cmzdril-ensemble")
    throw std::runtime_error("ensemble: bad manifest header");
  manifest >> tok;  // version
  manifest >> tok;  // "members"
  int count = 0;
  manifest >> count;
  Ensemble ensemble;
  std::string line;
  std::getline(manifest, line);  // finish the count line
  for (int i = 0; i < count; ++i) {
    if (!std::getline(manifest, line))
      throw std::runtime_error("ensemble: truncated manifest");
    std::istringstream fields(line);
    int idx = 0;
    std::uint64_t seed = 0;
    fields >> tok >> idx >> tok >> seed >> tok;
    std::vector<int> resample;
    int r;
    while (fields >> r) resample.push_back(r);
    ensemble.member_seeds.push_back(seed);
    ensemble.resample_indices.push_back(std::move(resample));
    char name[32];
    std::snprintf(name, sizeof(name), "member_%03d.ckpt", i);
    ensemble.members.push_back(load_policy(dir + "/" + name));
  }
  return ensemble;
}

}  // namespace cmzdril
