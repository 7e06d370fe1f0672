#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmzdril/env.hpp"
#include "cmzdril/tensor.hpp"

namespace cmzdril {

/// One recorded episode; row t holds the observation seen at step t and the
/// expert action taken from it.
struct Episode {
  Mat observations;
  Mat actions;
  std::uint64_t seed = 0;
};

/// Expert observation-action pairs grouped by episode.
struct DemoSet {
  std::string env_name;
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<Episode> episodes;

  int total_pairs() const;
  bool empty() const { return episodes.empty(); }

  /// All observations stacked, episode order preserved.
  Mat stacked_observations() const;
  Mat stacked_actions() const;
};

/// Rolls the scripted expert for n_episodes; episode e resets the environment
/// with a seed derived from (seed, e).
DemoSet collect_demos(Env& env, int n_episodes, std::uint64_t seed);

/// Binary round-trip exact format: fixed header then per-episode
/// length-prefixed flat arrays, all little-endian.
void save_demos(const DemoSet& demos, const std::string& path);
DemoSet load_demos(const std::string& path);

}  // namespace cmzdril
