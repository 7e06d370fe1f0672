#include "cmzdril/adam.hpp"

#include <cmath>

namespace cmzdril {

Adam::Adam(Params params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (const Tensor* p : params_) {
    first_moment_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    second_moment_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, step_count_);
  const double bc2 = 1.0 - std::pow(config_.beta2, step_count_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    Mat& m = first_moment_[i];
    Mat& v = second_moment_[i];
    m = config_.beta1 * m + (1.0 - config_.beta1) * p.grad;
    v = config_.beta2 * v.array() +
        (1.0 - config_.beta2) * p.grad.array().square();
    const Mat m_hat = m / bc1;
    const Mat v_hat = v / bc2;
    p.value.array() -=
        config_.lr * m_hat.array() / (v_hat.array().sqrt() + config_.eps);
  }
}

}  // namespace cmzdril
