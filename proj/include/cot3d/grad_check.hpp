#pragma once

#include <functional>

#include "cot3d/tensor.hpp"

namespace cot3d {

// A scalar objective over a fixed set of parameters. When `with_grad` is
// true the function must also accumulate dL/dparam into each block's grad
// (grads are zeroed by the caller beforehand).
using ScalarObjective = std::function<double(bool with_grad)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

// Central finite differences against the analytic gradient over every entry
// of every block in `params`. The relative error of one entry is
// |a - n| / max(|a|, |n|, 1e-6); the floor keeps entries whose true gradient
// is ~0 from dominating with roundoff noise.
GradCheckResult grad_check_detailed(const ScalarObjective& fn, const ParamList& params,
                                    double eps = 1e-6);

double grad_check(const ScalarObjective& fn, const ParamList& params, double eps = 1e-6);

}  // namespace cot3d
