#include "birgat/tape.hpp"

namespace birgat {

void Tape::backward(const TensorPtr& root, double seed) {
  if (root->numel() != 1) throw ShapeMismatch("backward: root must be scalar, got " + root->shape_str());
  if (!root->requires_grad) return;
  root->grad[0] += seed;
  backward_seeded();
}

void Tape::backward_seeded() {
  if (used_) throw Error("Tape::backward called twice on the same tape");
  used_ = true;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace birgat
