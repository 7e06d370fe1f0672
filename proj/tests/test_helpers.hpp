#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cmzdril/tensor.hpp"

namespace cmzdril::testing {

struct GradCheckResult {
  bool ok = true;
  double worst_error = 0.0;
  std::string worst_location;
};

/// Central finite-difference check of already-accumulated analytic
/// gradients. `loss` must evaluate the scalar objective at the parameters'
/// current values. Error is relative with a small-magnitude floor so
/// near-zero components are held to a matching absolute tolerance.
inline GradCheckResult check_gradients(const Params& params,
                                       const std::function<double()>& loss,
                                       double h = 1e-5, double tol = 1e-4,
                                       double floor = 1e-2) {
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& tensor = *params[p];
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      double* v = tensor.value.data() + i;
      const double saved = *v;
      *v = saved + h;
      const double plus = loss();
      *v = saved - h;
      const double minus = loss();
      *v = saved;
      const double fd = (plus - minus) / (2.0 * h);
      const double analytic = tensor.grad.data()[i];
      const double denom =
          std::max({std::abs(fd), std::abs(analytic), floor});
      const double err = std::abs(fd - analytic) / denom;
      if (err > result.worst_error) {
        result.worst_error = err;
        result.worst_location = "param " + std::to_string(p) + " index " +
                                std::to_string(i);
      }
      if (err > tol) result.ok = false;
    }
  }
  return result;
}

}  // namespace cmzdril::testing
