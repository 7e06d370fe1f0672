#include "cmzdril/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cmzdril {

std::string to_string(ShaperMode mode) {
  switch (mode) {
    case ShaperMode::Cmz: return "cmz";
    case ShaperMode::Dril: return "dril";
    case ShaperMode::Penalty: return "penalty";
    case ShaperMode::TrueEnv: return "true-env";
    case ShaperMode::Zero: return "zero";
  }
  throw std::logic_error("unreachable shaper mode");
}

ShaperMode parse_shaper_mode(const std::string& name) {
  if (name == "cmz") return ShaperMode::Cmz;
  if (name == "dril") return ShaperMode::Dril;
  if (name == "penalty") return ShaperMode::Penalty;
  if (name == "true-env") return ShaperMode::TrueEnv;
  if (name == "zero") return ShaperMode::Zero;
  throw std::invalid_argument("unknown shaper mode '" + name + "'");
}

RewardShaper::RewardShaper(ShaperConfig config) : config_(config) {
  if (config_.alpha <= 0.0)
    throw std::invalid_argument("RewardShaper: alpha must be positive");
  if (config_.gamma <= 0.0 || config_.gamma >= 1.0)
    throw std::invalid_argument("RewardShaper: gamma must lie in (0, 1)");
}

void RewardShaper::reset_episode() {
  if (config_.reset_average_per_episode) average_ = 0.0;
}

double RewardShaper::cmz(double u) {
  // Reward with the pre-update average, then fold u into the average.
  const double reward = -config_.alpha * (u - average_);
  average_ = config_.gamma * average_ + (1.0 - config_.gamma) * u;
  return reward;
}

double RewardShaper::shape(double env_reward, double u) {
  switch (config_.mode) {
    case ShaperMode::Cmz:
      if (u < 0.0)
        throw std::invalid_argument("RewardShaper: negative disagreement");
      return cmz(u);
    case ShaperMode::Dril:
      if (config_.dril_threshold < 0.0)
        throw std::runtime_error(
            "RewardShaper: DRIL threshold not configured");
      return u <= config_.dril_threshold ? 1.0 : -1.0;
    case ShaperMode::Penalty:
      return -config_.alpha * u;
    case ShaperMode::TrueEnv:
      return env_reward;
    case ShaperMode::Zero:
      return 0.0;
  }
  throw std::logic_error("unreachable shaper mode");
}

double calibrate_dril_threshold(const Ensemble& ensemble, const DemoSet& demos,
                                double q) {
  if (demos.empty())
    throw std::invalid_argument("calibrate_dril_threshold: empty demos");
  if (q <= 0.0 || q > 1.0)
    throw std::invalid_argument("calibrate_dril_threshold: q must be in (0, 1]");

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(demos.total_pairs()));
  for (const Episode& ep : demos.episodes)
    for (Eigen::Index r = 0; r < ep.observations.rows(); ++r)
      values.push_back(
          ensemble_std(ensemble, ep.observations.row(r).transpose()));
  std::sort(values.begin(), values.end());

  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace cmzdril
