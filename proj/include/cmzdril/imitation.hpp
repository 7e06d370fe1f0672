#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmzdril/demos.hpp"
#include "cmzdril/policy.hpp"

namespace cmzdril {

struct BcConfig {
  int epochs = 2000;
  int batch_size = 64;
  double lr = 1e-3;
  // Below this many pairs the whole set is one batch.
  int full_batch_threshold = 512;
};

/// Minimizes mean Gaussian NLL over shuffled minibatches with Adam.
/// Returns the per-epoch mean loss curve. Throws on an empty DemoSet.
std::vector<double> bc_train(GaussianPolicy& policy, const DemoSet& demos,
                             const BcConfig& config, std::uint64_t seed);

/// One epoch of NLL minimization over the stacked pairs: full batch below
/// the threshold, otherwise shuffled minibatches. Returns the mean loss.
/// bc_train and the interleaved pass of the training loop both run on this.
double nll_epoch(GaussianPolicy& policy, const Mat& observations,
                 const Mat& actions, class Adam& optimizer, Rng& rng,
                 const BcConfig& config);

/// Bagged policy ensemble; action-mean disagreement across members is the
/// uncertainty signal.
struct Ensemble {
  std::vector<GaussianPolicy> members;
  std::vector<std::uint64_t> member_seeds;
  std::vector<std::vector<int>> resample_indices;  // episodes per member

  int size() const { return static_cast<int>(members.size()); }
};

/// Trains K >= 2 members, each on a bootstrap resample of episodes (sampled
/// with replacement, same episode count) from a distinct init seed.
Ensemble train_ensemble(const DemoSet& demos, int k, const BcConfig& config,
                        std::uint64_t seed);

/// Mean over action dimensions of the population standard deviation of the
/// member means at `obs`. Nonnegative; zero iff all members agree exactly.
double ensemble_std(const Ensemble& ensemble, const Vec& obs);

void save_ensemble(const Ensemble& ensemble, const std::string& dir);
Ensemble load_ensemble(const std::string& dir);

}  // namespace cmzdril
