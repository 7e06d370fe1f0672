#pragma once

#include <string>

#include "cmzdril/mlp.hpp"
#include "cmzdril/policy.hpp"

namespace cmzdril {

/// Versioned text checkpoints. Values are written as C hexfloats so a
/// save/load round trip reproduces every parameter bit-exactly.
void save_policy(const GaussianPolicy& policy, const std::string& path);
GaussianPolicy load_policy(const std::string& path);

void save_value_net(const ValueNet& net, const std::string& path);
ValueNet load_value_net(const std::string& path);

std::string format_hex(double v);
double parse_hex(const std::string& s);

}  // namespace cmzdril
