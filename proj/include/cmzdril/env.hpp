#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "cmzdril/tensor.hpp"

namespace cmzdril {

/// One environment transition. `reward` is the true environment reward; it is
/// never shown to uncertainty-shaped trainers and exists for evaluation and
/// the true-reward ablation.
struct EnvStep {
  Vec observation;
  double reward = 0.0;
  bool done = false;
  int step_index = 0;
};

class Env {
 public:
  virtual ~Env() = default;

  virtual const std::string& name() const = 0;
  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  virtual int horizon() const = 0;

  /// Deterministic per seed. Throws std::runtime_error if a valid initial
  /// state cannot be placed within the retry budget.
  virtual Vec reset(std::uint64_t seed) = 0;

  /// Actions are clipped to [-1, 1] per dimension before dynamics. Stepping a
  /// finished episode throws std::logic_error.
  virtual EnvStep step(const Vec& action) = 0;

  /// Scripted expert for the current state. Output lies in [-1, 1].
  virtual Vec expert_action() const = 0;

  /// Point used for path traces: planar position for navigation, phase-space
  /// point for the pendulum.
  virtual Eigen::Vector2d trace_point() const = 0;

  virtual bool done() const = 0;
};

/// Builds "waypoint" or "pendulum" with default settings.
std::unique_ptr<Env> make_env(const std::string& name);

}  // namespace cmzdril
