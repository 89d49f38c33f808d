#include "birgat/param_store.hpp"

#include "birgat/errors.hpp"

namespace birgat {

TensorPtr ParamStore::create(const std::string& name, std::vector<int> shape, Init init, Rng& rng) {
  if (index_.count(name)) throw Error("ParamStore: duplicate parameter name " + name);
  TensorPtr t;
  switch (init) {
    case Init::Normal002:
      t = randn(std::move(shape), 0.02, rng, true);
      break;
    case Init::Zeros:
      t = zeros(std::move(shape), true);
      break;
    case Init::Ones:
      t = full(std::move(shape), 1.0, true);
      break;
  }
  index_[name] = items_.size();
  items_.emplace_back(name, t);
  return t;
}

TensorPtr ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("ParamStore: unknown parameter " + name);
  return items_[it->second].second;
}

int64_t ParamStore::total_elements() const {
  int64_t n = 0;
  for (const auto& [_, t] : items_) n += t->numel();
  return n;
}

void ParamStore::zero_grad() {
  for (const auto& [_, t] : items_) t->zero_grad();
}

}  // namespace birgat
