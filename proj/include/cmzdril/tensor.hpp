#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cmzdril {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Dense parameter block: a value matrix with a paired gradient buffer of the
/// same shape. Vectors are stored as n-by-1 matrices.
struct Tensor {
  Mat value;
  Mat grad;

  Tensor() = default;
  Tensor(Eigen::Index rows, Eigen::Index cols)
      : value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}
  explicit Tensor(Mat v) : value(std::move(v)) {
    grad = Mat::Zero(value.rows(), value.cols());
  }

  Eigen::Index size() const { return value.size(); }

  void zero_grad() { grad.setZero(); }

  bool finite() const { return value.allFinite() && grad.allFinite(); }
};

using Params = std::vector<Tensor*>;

inline void zero_grads(const Params& params) {
  for (Tensor* p : params) p->zero_grad();
}

inline bool params_finite(const Params& params) {
  for (const Tensor* p : params)
    if (!p->finite()) return false;
  return true;
}

}  // namespace cmzdril
