#pragma once

#include <functional>
#include <vector>

#include "birgat/tensor.hpp"

namespace birgat {

/// Records backward closures in forward (topological) order; backward()
/// replays them in reverse exactly once, accumulating gradients additively
/// at fan-out. One Tape belongs to one logical thread of execution.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  void record(std::function<void()> fn) {
    if (grad_enabled_) nodes_.push_back(std::move(fn));
  }

  /// Seeds d(root)/d(root) = seed (root must be scalar) and replays.
  void backward(const TensorPtr& root, double seed = 1.0);

  /// Replays with whatever gradients have been seeded externally.
  void backward_seeded();

  size_t node_count() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::function<void()>> nodes_;
  bool grad_enabled_ = true;
  bool used_ = false;
};

}  // namespace birgat
