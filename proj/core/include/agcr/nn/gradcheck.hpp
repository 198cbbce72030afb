#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>

namespace agcr::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Central differences (f(x+eps) - f(x-eps)) / 2eps for every entry of `x`
/// (perturbed in place and restored) against `analytic`.
/// `stride` > 1 checks every stride-th entry only.
inline GradCheckResult grad_check(const std::function<double()>& f, std::span<double> x,
                                  std::span<const double> analytic, double eps = 1e-6, std::size_t stride = 1) {
  GradCheckResult res;
  for (std::size_t i = 0; i < x.size(); i += std::max<std::size_t>(stride, 1)) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double fp = f();
    x[i] = saved - eps;
    const double fm = f();
    x[i] = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double err = relative_error(analytic[i], numeric);
    if (++res.checked == 1 || err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_index = i;
      res.analytic = analytic[i];
      res.numeric = numeric;
    }
  }
  return res;
}

}  // namespace agcr::nn
