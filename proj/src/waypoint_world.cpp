#include "cmzdril/waypoint_world.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmzdril {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double a) {
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

double clip(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Distance from point p to segment ab, and the normalized projection t.
double point_segment_distance(const Eigen::Vector2d& p,
                              const Eigen::Vector2d& a,
                              const Eigen::Vector2d& b, double* t_out) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = clip(t, 0.0, 1.0);
  if (t_out) *t_out = t;
  return (a + t * ab - p).norm();
}

// Expert tuning.
constexpr double kExpertClearance = 0.55;  // obstacle inflation when probing
constexpr double kSlowRadius = 2.0;        // throttle falls off inside this
constexpr double kMinThrottleScale = 0.35;
constexpr double kObstacleGap = 0.6;       // surface gap enforced at reset

}  // namespace

WaypointWorld::WaypointWorld(WaypointConfig config) : config_(config) {}

Vec WaypointWorld::reset(std::uint64_t seed) {
  Rng rng(seed);
  const double h = config_.world_half;
  const double margin = 1.5;

  const double min_separation = 1.2 * h;
  bool scene_ok = false;
  for (int scene = 0; scene < 50 && !scene_ok; ++scene) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      position_ = {rng.uniform(-h + margin, h - margin),
                   rng.uniform(-h + margin, h - margin)};
      goal_ = {rng.uniform(-h + margin, h - margin),
               rng.uniform(-h + margin, h - margin)};
      placed = (goal_ - position_).norm() >= min_separation;
    }
    if (!placed) continue;

    // Obstacles land in the corridor box around start->goal so that episodes
    // actually require avoidance; they keep clear of both endpoints and of
    // each other. A layout that cannot fit every obstacle is redrawn whole.
    obstacles_.clear();
    const double lo_x = std::max(-h, std::min(position_.x(), goal_.x()) - 2.5);
    const double hi_x = std::min(h, std::max(position_.x(), goal_.x()) + 2.5);
    const double lo_y = std::max(-h, std::min(position_.y(), goal_.y()) - 2.5);
    const double hi_y = std::min(h, std::max(position_.y(), goal_.y()) + 2.5);
    scene_ok = true;
    for (int i = 0; i < config_.obstacle_count && scene_ok; ++i) {
      bool ok = false;
      for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
        Circle c;
        c.radius = rng.uniform(config_.obstacle_radius_min,
                               config_.obstacle_radius_max);
        c.center = {rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)};
        const double clear = c.radius + config_.spawn_clearance;
        if ((c.center - position_).norm() < clear) continue;
        if ((c.center - goal_).norm() < clear) continue;
        bool overlaps = false;
        for (const Circle& other : obstacles_) {
          if ((c.center - other.center).norm() <
              c.radius + other.radius + kObstacleGap) {
            overlaps = true;
            break;
          }
        }
        if (overlaps) continue;
        obstacles_.push_back(c);
        ok = true;
      }
      scene_ok = ok;
    }
  }
  if (!scene_ok)
    throw std::runtime_error(
        "WaypointWorld: obstacle field too dense to place");

  // Spawn roughly facing the goal, with some slack to steer out of.
  const Eigen::Vector2d to_goal = goal_ - position_;
  heading_ = wrap_angle(std::atan2(to_goal.y(), to_goal.x()) +
                        rng.uniform(-0.6, 0.6));

  speed_ = 0.0;
  step_count_ = 0;
  done_ = false;
  return observation();
}

void WaypointWorld::set_scene(const Eigen::Vector2d& position, double heading,
                              const Eigen::Vector2d& goal,
                              std::vector<Circle> obstacles) {
  position_ = position;
  heading_ = wrap_angle(heading);
  goal_ = goal;
  obstacles_ = std::move(obstacles);
  speed_ = 0.0;
  step_count_ = 0;
  done_ = false;
}

EnvStep WaypointWorld::step(const Vec& action) {
  if (done_)
    throw std::logic_error("WaypointWorld: step() called on finished episode");
  if (action.size() != 2)
    throw std::invalid_argument("WaypointWorld: action must have 2 entries");

  const double heading_rate = clip(action[0], -1.0, 1.0);
  const double throttle = clip(action[1], -1.0, 1.0);

  heading_ = wrap_angle(heading_ + heading_rate * config_.max_turn);
  speed_ = config_.max_speed * (throttle + 1.0) / 2.0;

  const double prev_dist = (goal_ - position_).norm();
  position_ += speed_ * Eigen::Vector2d(std::cos(heading_), std::sin(heading_));
  position_.x() = clip(position_.x(), -config_.world_half, config_.world_half);
  position_.y() = clip(position_.y(), -config_.world_half, config_.world_half);
  const double new_dist = (goal_ - position_).norm();

  double reward =
      (prev_dist - new_dist) * config_.progress_gain - config_.time_penalty;

  if (inside_any_obstacle(position_, 0.0)) {
    reward -= config_.collision_penalty;
    done_ = true;
  } else if (new_dist <= config_.goal_radius) {
    reward += config_.goal_bonus;
    done_ = true;
  }

  ++step_count_;
  if (step_count_ >= config_.horizon) done_ = true;

  EnvStep out;
  out.observation = observation();
  out.reward = reward;
  out.done = done_;
  out.step_index = step_count_ - 1;
  return out;
}

Vec WaypointWorld::observation() const {
  Vec obs(obs_dim());
  const int b = config_.beams;
  for (int k = 0; k < b; ++k) {
    const double angle = heading_ + 2.0 * kPi * k / b;
    obs[k] = lidar_reading(position_, angle) / config_.max_range;
  }
  // Goal vector rotated into the agent frame, in units of lidar range, with
  // its magnitude saturated at the range so distant goals read as direction.
  Eigen::Vector2d to_goal = goal_ - position_;
  const double dist = to_goal.norm();
  if (dist > config_.max_range) to_goal *= config_.max_range / dist;
  const double c = std::cos(heading_);
  const double s = std::sin(heading_);
  obs[b] = (c * to_goal.x() + s * to_goal.y()) / config_.max_range;
  obs[b + 1] = (-s * to_goal.x() + c * to_goal.y()) / config_.max_range;
  obs[b + 2] = speed_ / config_.max_speed;
  obs[b + 3] = std::sin(heading_);
  obs[b + 4] = std::cos(heading_);
  return obs;
}

double WaypointWorld::lidar_reading(const Eigen::Vector2d& origin,
                                    double angle) const {
  const Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
  double best = config_.max_range;
  for (const Circle& c : obstacles_) {
    const Eigen::Vector2d oc = origin - c.center;
    const double b = oc.dot(dir);
    const double c0 = oc.squaredNorm() - c.radius * c.radius;
    const double disc = b * b - c0;
    if (disc < 0.0) continue;
    const double s = std::sqrt(disc);
    const double near = -b - s;
    const double far = -b + s;
    double t;
    if (near >= 0.0)
      t = near;
    else if (far >= 0.0)
      t = 0.0;  // origin inside the circle
    else
      continue;
    if (t < best) best = t;
  }
  return clip(best, 0.0, config_.max_range);
}

bool WaypointWorld::inside_any_obstacle(const Eigen::Vector2d& p,
                                        double margin) const {
  for (const Circle& c : obstacles_)
    if ((p - c.center).norm() <= c.radius + margin) return true;
  return false;
}

bool WaypointWorld::segment_blocked(const Eigen::Vector2d& a,
                                    const Eigen::Vector2d& b, double inflate,
                                    int* blocking) const {
  double best_t = 2.0;
  int best = -1;
  for (std::size_t i = 0; i < obstacles_.size(); ++i) {
    double t = 0.0;
    const double d =
        point_segment_distance(obstacles_[i].center, a, b, &t);
    if (d < obstacles_[i].radius + inflate && t < best_t) {
      best_t = t;
      best = static_cast<int>(i);
    }
  }
  if (blocking) *blocking = best;
  return best >= 0;
}

Vec WaypointWorld::expert_action() const {
  if (done_)
    throw std::logic_error("WaypointWorld: expert_action() on finished episode");

  const Eigen::Vector2d to_goal = goal_ - position_;
  const double goal_bearing = std::atan2(to_goal.y(), to_goal.x());

  int blocking = -1;
  const bool blocked =
      segment_blocked(position_, goal_, kExpertClearance, &blocking);

  double target_bearing = goal_bearing;
  if (blocked) {
    const Circle& obs = obstacles_[static_cast<std::size_t>(blocking)];
    const Eigen::Vector2d to_obs = obs.center - position_;
    const double dist = to_obs.norm();
    const double inflated = obs.radius + kExpertClearance;
    const double obs_bearing = std::atan2(to_obs.y(), to_obs.x());
    if (dist <= inflated) {
      // Inside the inflated disc: back straight out.
      target_bearing = wrap_angle(obs_bearing + kPi);
    } else {
      // Follow the tangent line of the inflated disc that deviates least
      // from the goal bearing.
      const double cone = std::asin(clip(inflated / dist, 0.0, 1.0));
      const double left = wrap_angle(obs_bearing + cone);
      const double right = wrap_angle(obs_bearing - cone);
      target_bearing =
          std::abs(wrap_angle(left - goal_bearing)) <=
                  std::abs(wrap_angle(right - goal_bearing))
              ? left
              : right;
    }
  }

  const double err = wrap_angle(target_bearing - heading_);
  const double heading_rate = clip(err / config_.max_turn, -1.0, 1.0);

  // Full throttle on a clear ray; otherwise slow near obstacles and through
  // sharp turns.
  double throttle = 1.0;
  if (blocked) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const Circle& c : obstacles_)
      nearest = std::min(nearest, (position_ - c.center).norm() - c.radius);
    double scale = clip(nearest / kSlowRadius, kMinThrottleScale, 1.0);
    scale *= clip(std::cos(err), kMinThrottleScale, 1.0);
    throttle = 2.0 * scale - 1.0;
  }

  Vec action(2);
  action[0] = heading_rate;
  action[1] = clip(throttle, -1.0, 1.0);
  return action;
}

}  // namespace cmzdril
