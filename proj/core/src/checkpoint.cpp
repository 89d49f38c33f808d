#include "birgat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "birgat/errors.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian host");

namespace birgat {

TensorPtr TensorFile::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  return nullptr;
}

void save_tensors(const std::string& path, const TensorFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "BIRGAT-TENSORS 1\n";
  for (const auto& [k, v] : file.meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
      throw IoError("checkpoint meta key/value must be single-line, key=" + k);
    out << "meta " << k << " " << v << "\n";
  }
  for (const auto& [name, t] : file.tensors) {
    if (name.find_first_of(" \n") != std::string::npos) throw IoError("tensor name contains whitespace: " + name);
    out << "tensor " << name << " " << t->shape.size();
    for (int d : t->shape) out << " " << d;
    out << "\n";
  }
  out << "end\n";
  for (const auto& [name, t] : file.tensors)
    out.write(reinterpret_cast<const char*>(t->data.data()),
              static_cast<std::streamsize>(t->data.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path);
}

TensorFile load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "BIRGAT-TENSORS 1")
    throw SchemaError(path + ": not a tensor container (bad magic)");
  TensorFile file;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      file.meta[key] = value;
    } else if (kind == "tensor") {
      std::string name;
      size_t ndim = 0;
      ls >> name >> ndim;
      std::vector<int> shape(ndim);
      for (size_t i = 0; i < ndim; ++i) ls >> shape[i];
      if (!ls) throw SchemaError(path + ": malformed tensor header line: " + line);
      file.tensors.emplace_back(name, make_tensor(shape, false));
    } else {
      throw SchemaError(path + ": unexpected header line: " + line);
    }
  }
  if (line != "end") throw SchemaError(path + ": missing end marker");
  for (auto& [name, t] : file.tensors) {
    in.read(reinterpret_cast<char*>(t->data.data()), static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(t->data.size() * sizeof(double)))
      throw SchemaError(path + ": truncated data for tensor " + name);
  }
  return file;
}

}  // namespace birgat
