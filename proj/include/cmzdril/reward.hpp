#pragma once

#include <string>

#include "cmzdril/demos.hpp"
#include "cmzdril/imitation.hpp"

namespace cmzdril {

enum class ShaperMode { Cmz, Dril, Penalty, TrueEnv, Zero };

std::string to_string(ShaperMode mode);
ShaperMode parse_shaper_mode(const std::string& name);

struct ShaperConfig {
  ShaperMode mode = ShaperMode::Cmz;
  double alpha = 10.0;           // > 0
  double gamma = 0.99;           // in (0, 1)
  double dril_threshold = -1.0;  // < 0 means unset; required for Dril
  double dril_quantile = 0.98;   // expert-state quantile used to calibrate
  // Sensitivity toggle: reset the running average at every episode start
  // (default) or let it carry across episodes within a run.
  bool reset_average_per_episode = true;
};

/// Training-reward shaper. CMZ keeps the running exponential average of the
/// disagreement and pays r = -alpha * (u - avg), reward first, update second,
/// so the mean reward tracks zero over an episode.
class RewardShaper {
 public:
  explicit RewardShaper(ShaperConfig config);

  /// Called at every episode start; resets the exponential average to 0
  /// unless the carry-across toggle is set.
  void reset_episode();

  /// Maps a step's true env reward and disagreement u to the training reward.
  double shape(double env_reward, double u);

  double running_average() const { return average_; }
  const ShaperConfig& config() const { return config_; }

 private:
  double cmz(double u);

  ShaperConfig config_;
  double average_ = 0.0;
};

/// q-quantile (linear interpolation) of the ensemble disagreement over all
/// expert observations. Default q = 0.98.
double calibrate_dril_threshold(const Ensemble& ensemble, const DemoSet& demos,
                                double q = 0.98);

}  // namespace cmzdril
