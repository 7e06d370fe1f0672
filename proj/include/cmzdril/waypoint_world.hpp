#pragma once

#include <vector>

#include "cmzdril/env.hpp"
#include "cmzdril/rng.hpp"

namespace cmzdril {

struct WaypointConfig {
  int beams = 16;            // lidar beam count
  double max_range = 10.0;   // lidar range R
  double world_half = 10.0;  // world spans [-world_half, world_half]^2
  int obstacle_count = 8;
  double obstacle_radius_min = 0.5;
  double obstacle_radius_max = 1.5;
  double max_speed = 0.5;    // distance per step at full throttle
  double max_turn = 0.3;     // heading change per step at full rate, rad
  int horizon = 300;
  double goal_radius = 0.5;  // goal reached within this distance
  double progress_gain = 1.0;
  double time_penalty = 0.01;
  double goal_bonus = 10.0;
  double collision_penalty = 10.0;
  double spawn_clearance = 1.0;  // gap between obstacles and start/goal
};

struct Circle {
  Eigen::Vector2d center;
  double radius = 0.0;
};

/// Planar waypoint navigation with a lidar ring. Observation layout:
/// [beams lidar readings / R, goal vector in the agent frame / R (2),
/// speed / max_speed (1), sin(heading), cos(heading)] -> obs_dim = beams + 5.
/// Action: (heading_rate, throttle) in [-1, 1]^2; throttle -1 is a stop.
/// Positive heading_rate turns left (counterclockwise).
class WaypointWorld final : public Env {
 public:
  explicit WaypointWorld(WaypointConfig config = {});

  const std::string& name() const override { return name_; }
  int obs_dim() const override { return config_.beams + 5; }
  int act_dim() const override { return 2; }
  int horizon() const override { return config_.horizon; }

  Vec reset(std::uint64_t seed) override;
  EnvStep step(const Vec& action) override;
  Vec expert_action() const override;
  Eigen::Vector2d trace_point() const override { return position_; }
  bool done() const override { return done_; }

  const WaypointConfig& config() const { return config_; }
  const std::vector<Circle>& obstacles() const { return obstacles_; }
  const Eigen::Vector2d& position() const { return position_; }
  const Eigen::Vector2d& goal() const { return goal_; }
  double heading() const { return heading_; }

  /// Exact ray-circle intersection distance from `origin` along `angle`,
  /// capped at max_range.
  double lidar_reading(const Eigen::Vector2d& origin, double angle) const;

  /// Installs an explicit scene and rearms the episode; placement invariants
  /// are the caller's responsibility.
  void set_scene(const Eigen::Vector2d& position, double heading,
                 const Eigen::Vector2d& goal, std::vector<Circle> obstacles);

 private:
  Vec observation() const;
  bool inside_any_obstacle(const Eigen::Vector2d& p, double margin) const;
  bool segment_blocked(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                       double inflate, int* blocking) const;

  WaypointConfig config_;
  std::string name_ = "waypoint";
  std::vector<Circle> obstacles_;
  Eigen::Vector2d position_{0.0, 0.0};
  Eigen::Vector2d goal_{0.0, 0.0};
  double heading_ = 0.0;
  double speed_ = 0.0;
  int step_count_ = 0;
  bool done_ = true;
};

}  // namespace cmzdril
