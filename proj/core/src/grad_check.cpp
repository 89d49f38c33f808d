#include "birgat/grad_check.hpp"

#include <cmath>

#include "birgat/errors.hpp"
#include "birgat/ops.hpp"

namespace birgat {

static double eval_scalar(const std::function<TensorPtr(Tape&)>& f) {
  Tape tape(false);
  auto y = f(tape);
  if (y->numel() != 1) throw ShapeMismatch("grad_check: function must return a scalar, got " + y->shape_str());
  if (!std::isfinite(y->data[0])) throw NonFiniteValue("grad_check: function produced non-finite value");
  return y->data[0];
}

GradCheckResult grad_check(const std::function<TensorPtr(Tape&)>& f,
                           const std::vector<std::pair<std::string, TensorPtr>>& params, double eps) {
  for (const auto& [name, p] : params) p->zero_grad();
  {
    Tape tape(true);
    auto y = f(tape);
    if (y->numel() != 1) throw ShapeMismatch("grad_check: function must return a scalar");
    if (!std::isfinite(y->data[0])) throw NonFiniteValue("grad_check: non-finite forward value");
    tape.backward(y);
  }
  GradCheckResult result;
  for (const auto& [name, p] : params) {
    if (!p->requires_grad) continue;
    // per-parameter comparison: || analytic - numeric || relative to the
    // gradient magnitude, so near-zero elements do not drown the measurement
    // in finite-difference rounding noise
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    double worst_diff = -1.0;
    int worst_idx = -1;
    for (size_t i = 0; i < p->data.size(); ++i) {
      const double analytic = p->grad[i];
      if (!std::isfinite(analytic)) throw NonFiniteValue("grad_check: non-finite gradient in " + name);
      const double saved = p->data[i];
      p->data[i] = saved + eps;
      const double fp = eval_scalar(f);
      p->data[i] = saved - eps;
      const double fm = eval_scalar(f);
      p->data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      diff_sq += (analytic - numeric) * (analytic - numeric);
      a_sq += analytic * analytic;
      n_sq += numeric * numeric;
      if (std::fabs(analytic - numeric) > worst_diff) {
        worst_diff = std::fabs(analytic - numeric);
        worst_idx = static_cast<int>(i);
      }
    }
    const double denom = std::max({std::sqrt(a_sq), std::sqrt(n_sq), 1e-8});
    const double rel = std::sqrt(diff_sq) / denom;
    if (rel > result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst_param = name;
      result.worst_index = worst_idx;
    }
  }
  return result;
}

}  // namespace birgat
