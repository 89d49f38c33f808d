#pragma once

#include <map>
#include <string>
#include <vector>

#include "birgat/tensor.hpp"

namespace birgat {

/// Named-tensor container file: a text header listing (name, shape) pairs and
/// meta key/value lines, followed by the raw little-endian doubles in header
/// order. Round-trips byte-exactly.
struct TensorFile {
  std::vector<std::pair<std::string, TensorPtr>> tensors;
  std::map<std::string, std::string> meta;

  TensorPtr find(const std::string& name) const;
};

void save_tensors(const std::string& path, const TensorFile& file);
TensorFile load_tensors(const std::string& path);

}  // namespace birgat
