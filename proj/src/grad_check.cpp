#include "cot3d/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace cot3d {

GradCheckResult grad_check_detailed(const ScalarObjective& fn, const ParamList& params,
                                    double eps) {
  if (!(eps > 1e-8 && eps < 1e-3)) {
    throw RangeError("grad_check: eps must lie in (1e-8, 1e-3), got " + std::to_string(eps));
  }
  zero_grads(params);
  const double base = fn(true);
  if (!std::isfinite(base)) throw EvaluationError("grad_check: objective is not finite");

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const ParamBlock* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t b = 0; b < params.size(); ++b) {
    ParamBlock& p = *params[b];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = fn(false);
      p.value[i] = saved - eps;
      const double down = fn(false);
      p.value[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw EvaluationError("grad_check: objective is not finite near " + p.name);
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[b][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_param = p.name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

double grad_check(const ScalarObjective& fn, const ParamList& params, double eps) {
  return grad_check_detailed(fn, params, eps).max_relative_error;
}

}  // namespace cot3d
