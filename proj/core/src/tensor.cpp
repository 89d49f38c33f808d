#include "birgat/tensor.hpp"

#include <sstream>

namespace birgat {

Tensor::Tensor(std::vector<int> shp, bool rg) : shape(std::move(shp)), requires_grad(rg) {
  data.assign(static_cast<size_t>(numel()), 0.0);
  if (requires_grad) grad.assign(data.size(), 0.0);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

TensorPtr make_tensor(std::vector<int> shape, bool requires_grad) {
  return std::make_shared<Tensor>(std::move(shape), requires_grad);
}

TensorPtr zeros(std::vector<int> shape, bool requires_grad) {
  return make_tensor(std::move(shape), requires_grad);
}

TensorPtr full(std::vector<int> shape, double value, bool requires_grad) {
  auto t = make_tensor(std::move(shape), requires_grad);
  std::fill(t->data.begin(), t->data.end(), value);
  return t;
}

TensorPtr from_values(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  auto t = make_tensor(std::move(shape), requires_grad);
  if (static_cast<int64_t>(values.size()) != t->numel())
    throw ShapeMismatch("from_values: " + std::to_string(values.size()) + " values for shape " + t->shape_str());
  t->data = std::move(values);
  return t;
}

TensorPtr scalar(double value, bool requires_grad) {
  return from_values({1, 1}, {value}, requires_grad);
}

TensorPtr randn(std::vector<int> shape, double stddev, Rng& rng, bool requires_grad) {
  auto t = make_tensor(std::move(shape), requires_grad);
  for (double& x : t->data) x = stddev * rng.gauss();
  return t;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) shape_error(op, a, b);
}

void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeMismatch(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

}  // namespace birgat
