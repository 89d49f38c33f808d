#pragma once

#include <functional>
#include <string>
#include <vector>

#include "birgat/tape.hpp"

namespace birgat {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
};

/// Compares analytic gradients of a scalar function against central finite
/// differences (step eps) over every element of every listed parameter.
/// f must be deterministic (dropout off or rng frozen). Returns the max over
/// parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
/// measured per parameter in the L2 norm.
GradCheckResult grad_check(const std::function<TensorPtr(Tape&)>& f,
                           const std::vector<std::pair<std::string, TensorPtr>>& params,
                           double eps = 1e-5);

}  // namespace birgat
