#include "cmzdril/env.hpp"

#include <stdexcept>

#include "cmzdril/pendulum_world.hpp"
#include "cmzdril/waypoint_world.hpp"

namespace cmzdril {

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "waypoint") return std::make_unique<WaypointWorld>();
  if (name == "pendulum") return std::make_unique<PendulumWorld>();
  throw std::invalid_argument("unknown environment '" + name + "'");
}

}  // namespace cmzdril
