#pragma once

#include "cmzdril/env.hpp"

namespace cmzdril {

struct PendulumConfig {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 10.0;
  double dt = 0.05;
  double torque_limit = 2.0;
  double max_angular_velocity = 8.0;
  int horizon = 200;
};

/// Torque-limited pendulum swing-up. Angle is measured from upright and
/// wrapped to (-pi, pi]; observation is [cos(theta), sin(theta), theta_dot].
/// Episodes always run the full horizon. True reward is
/// -(theta^2 + 0.1 theta_dot^2 + 0.001 torque^2) on the pre-step state.
class PendulumWorld final : public Env {
 public:
  explicit PendulumWorld(PendulumConfig config = {});

  const std::string& name() const override { return name_; }
  int obs_dim() const override { return 3; }
  int act_dim() const override { return 1; }
  int horizon() const override { return config_.horizon; }

  Vec reset(std::uint64_t seed) override;
  EnvStep step(const Vec& action) override;
  Vec expert_action() const override;
  Eigen::Vector2d trace_point() const override {
    return {angle_, angular_velocity_};
  }
  bool done() const override { return done_; }

  double angle() const { return angle_; }
  double angular_velocity() const { return angular_velocity_; }
  const PendulumConfig& config() const { return config_; }

  /// Places the pendulum at an explicit state and rearms the episode.
  void set_state(double angle, double angular_velocity);

 private:
  Vec observation() const;

  PendulumConfig config_;
  std::string name_ = "pendulum";
  double angle_ = 0.0;
  double angular_velocity_ = 0.0;
  int step_count_ = 0;
  bool done_ = true;
};

}  // namespace cmzdril
