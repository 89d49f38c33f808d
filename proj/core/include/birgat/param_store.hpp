#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "birgat/rng.hpp"
#include "birgat/tensor.hpp"

namespace birgat {

enum class Init { Normal002, Zeros, Ones };

/// Named trainable tensors with stable iteration order. Names are unique;
/// every trainable tensor of a model is registered exactly once.
class ParamStore {
 public:
  TensorPtr create(const std::string& name, std::vector<int> shape, Init init, Rng& rng);
  TensorPtr get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<std::pair<std::string, TensorPtr>>& items() const { return items_; }
  size_t size() const { return items_.size(); }

  int64_t total_elements() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, TensorPtr>> items_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace birgat
