#pragma once

// Central-difference gradient verification. The forward function is
// re-evaluated with each parameter element perturbed by +/- step and the
// quotient is compared against the tape gradient. Meant for the 64-bit
// build; finite differences at 32-bit are too noisy to assert against.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "spotlight/numerics/ops.hpp"
#include "spotlight/numerics/tensor.hpp"

namespace spotlight::num {

template <typename S>
struct NamedParam {
  std::string name;
  Tensor<S> tensor;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  double worst = 0.0;
  bool passed(double tolerance) const { return worst < tolerance; }
};

// `forward` must rebuild the computation from the current parameter values
// and return the scalar loss; it must be deterministic (dropout disabled).
template <typename S>
GradCheckReport finite_diff_check(const std::function<Tensor<S>()>& forward,
                                  std::vector<NamedParam<S>> params, double step) {
  for (auto& p : params) {
    if (!p.tensor.requires_grad || !p.tensor.grad) {
      throw NumericError("finite_diff_check: parameter '" + p.name +
                         "' does not require gradients");
    }
    p.tensor.zero_grad();
  }

  {
    GradTape<S> tape;
    Tensor<S> loss = forward();
    backward(loss);
  }

  const auto eval = [&]() -> double {
    Tensor<S> loss = forward();  // no tape active: pure forward
    if (!loss.is_scalar()) {
      throw ShapeError("finite_diff_check: forward must return a scalar");
    }
    return static_cast<double>(loss.val(0));
  };

  GradCheckReport report;
  for (auto& p : params) {
    GradCheckEntry entry{p.name, 0.0};
    std::vector<S>& values = *p.tensor.data;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const S saved = values[i];
      values[i] = saved + static_cast<S>(step);
      const double up = eval();
      values[i] = saved - static_cast<S>(step);
      const double down = eval();
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_check: non-finite forward value while perturbing '" +
                           p.name + "' element " + std::to_string(i));
      }
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = static_cast<double>((*p.tensor.grad)[i]);
      // Relative for O(1)+ gradients, absolute below unit scale: some
      // gradients are structurally zero (e.g. a key bias under softmax) and
      // a pure ratio would amplify finite-difference noise to O(1).
      const double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
    }
    report.worst = std::max(report.worst, entry.max_rel_error);
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

}  // namespace spotlight::num
