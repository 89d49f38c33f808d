#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "birgat/errors.hpp"
#include "birgat/rng.hpp"

namespace birgat {

/// Dense row-major tensor of doubles. The library only ever builds rank-2
/// tensors (scalars are 1x1); `shape` stays a general dimension list.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // same length as data iff requires_grad
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::vector<int> shp, bool rg);

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }
  double* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols(); }
  const double* row_ptr(int r) const { return data.data() + static_cast<size_t>(r) * cols(); }
  double& g(int r, int c) { return grad[static_cast<size_t>(r) * cols() + c]; }
  double* grad_row(int r) { return grad.data() + static_cast<size_t>(r) * cols(); }

  void zero_grad() {
    if (requires_grad) std::fill(grad.begin(), grad.end(), 0.0);
  }
  void ensure_grad() {
    if (requires_grad && grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  std::string shape_str() const;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad = false);
TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
TensorPtr full(std::vector<int> shape, double value, bool requires_grad = false);
TensorPtr from_values(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
TensorPtr scalar(double value, bool requires_grad = false);
TensorPtr randn(std::vector<int> shape, double stddev, Rng& rng, bool requires_grad = false);

void check_same_shape(const Tensor& a, const Tensor& b, const char* op);
[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b);

}  // namespace birgat
