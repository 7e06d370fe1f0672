#pragma once

#include <vector>

#include "cmzdril/tensor.hpp"

namespace cmzdril {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Gradients are read from each Tensor's grad
/// buffer and left untouched; callers zero them between steps.
class Adam {
 public:
  Adam() = default;
  explicit Adam(Params params, AdamConfig config = {});

  void step();
  void zero_grad() { zero_grads(params_); }

  long step_count() const { return step_count_; }
  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }

 private:
  Params params_;
  AdamConfig config_;
  long step_count_ = 0;
  std::vector<Mat> first_moment_;
  std::vector<Mat> second_moment_;
};

}  // namespace cmzdril
