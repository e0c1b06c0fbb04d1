#pragma once

// Central-difference gradient check over every entry of a parameter store.

#include <algorithm>
#include <cmath>
#include <functional>

#include "endonav/approx/param_store.hpp"

namespace endonav::testing {

struct GradCheck {
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;  // over entries with |g| above the floor
  std::size_t checked = 0;
};

// `loss` returns the scalar value; `grads` must return the analytic gradient
// in flat_values order evaluated at the current parameters.
inline GradCheck check_gradients(approx::ParamStore& store, const std::function<double()>& loss,
                                 const Eigen::VectorXd& analytic, double h = 1e-6,
                                 double floor = 1e-6, std::size_t stride = 1) {
  GradCheck out;
  const Eigen::VectorXd x0 = store.flat_values();
  for (Eigen::Index i = 0; i < x0.size(); i += static_cast<Eigen::Index>(stride)) {
    Eigen::VectorXd x = x0;
    x[i] += h;
    store.set_flat_values(x);
    const double fp = loss();
    x[i] -= 2 * h;
    store.set_flat_values(x);
    const double fm = loss();
    const double numeric = (fp - fm) / (2 * h);
    const double err = std::abs(numeric - analytic[i]);
    out.max_abs_error = std::max(out.max_abs_error, err);
    const double scale = std::abs(numeric) + std::abs(analytic[i]);
    if (scale > floor) out.max_rel_error = std::max(out.max_rel_error, err / scale);
    ++out.checked;
  }
  store.set_flat_values(x0);
  return out;
}

}  // namespace endonav::testing
