#include "cmzdril/pendulum_world.hpp"

#include <cmath>
#include <stdexcept>

#include "cmzdril/rng.hpp"

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

}  // namespace

PendulumWorld::PendulumWorld(PendulumConfig config) : config_(config) {}

Vec PendulumWorld::reset(std::uint64_t seed) {
  Rng rng(seed);
  angle_ = rng.uniform(-kPi, kPi);
  angular_velocity_ = rng.uniform(-1.0, 1.0);
  step_count_ = 0;
  done_ = false;
  return observation();
}

void PendulumWorld::set_state(double angle, double angular_velocity) {
  angle_ = wrap_angle(angle);
  angular_velocity_ = clip(angular_velocity, -config_.max_angular_velocity,
                           config_.max_angular_velocity);
  step_count_ = 0;
  done_ = false;
}

EnvStep PendulumWorld::step(const Vec& action) {
  if (done_)
    throw std::logic_error("PendulumWorld: step() called on finished episode");
  if (action.size() != 1)
    throw std::invalid_argument("PendulumWorld: action must have 1 entry");

  const double torque = clip(action[0], -1.0, 1.0) * config_.torque_limit;
  const double reward = -(angle_ * angle_ +
                          0.1 * angular_velocity_ * angular_velocity_ +
                          0.001 * torque * torque);

  const double m = config_.mass;
  const double l = config_.length;
  const double accel = 3.0 * config_.gravity / (2.0 * l) * std::sin(angle_) +
                       3.0 * torque / (m * l * l);
  angular_velocity_ = clip(angular_velocity_ + accel * config_.dt,
                           -config_.max_angular_velocity,
                           config_.max_angular_velocity);
  angle_ = wrap_angle(angle_ + angular_velocity_ * config_.dt);

  ++step_count_;
  if (step_count_ >= config_.horizon) done_ = true;

  EnvStep out;
  out.observation = observation();
  out.reward = reward;
  out.done = done_;
  out.step_index = step_count_ - 1;
  return out;
}

Vec PendulumWorld::observation() const {
  Vec obs(3);
  obs[0] = std::cos(angle_);
  obs[1] = std::sin(angle_);
  obs[2] = angular_velocity_;
  return obs;
}

Vec PendulumWorld::expert_action() const {
  if (done_)
    throw std::logic_error("PendulumWorld: expert_action() on finished episode");

  const double m = config_.mass;
  const double l = config_.length;
  const double g = config_.gravity;
  const double inertia = m * l * l / 3.0;
  const double energy = 0.5 * inertia * angular_velocity_ * angular_velocity_ +
                        0.5 * m * g * l * std::cos(angle_);
  const double target_energy = 0.5 * m * g * l;  // upright at rest

  double torque;
  if (std::abs(angle_) < 0.35 && std::abs(angular_velocity_) < 2.5) {
    // Capture zone: PD stabilization at upright.
    torque = -16.0 * angle_ - 4.0 * angular_velocity_;
  } else {
    // Pump or drain energy along the direction of motion.
    double direction;
    if (std::abs(angular_velocity_) > 1e-3)
      direction = angular_velocity_ > 0.0 ? 1.0 : -1.0;
    else
      direction = std::sin(angle_) >= 0.0 ? 1.0 : -1.0;
    torque = 2.0 * (target_energy - energy) * direction;
  }
  torque = clip(torque, -config_.torque_limit, config_.torque_limit);

  Vec action(1);
  action[0] = torque / config_.torque_limit;
  return action;
}

}  // namespace cmzdril
