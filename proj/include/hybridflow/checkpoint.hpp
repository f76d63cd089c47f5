#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "hybridflow/tensor.hpp"

namespace hf::ad {

// Named parameter container with free-form metadata.
//
// Text layout (version 1), one record per line:
//   hybridflow-checkpoint 1
//   meta <key> <value>                       (zero or more; value has no newline)
//   tensor <name> <rank> <d0> ... <d{rank-1}>
//   <v0> <v1> ... <v{n-1}>                   (17 significant digits, exact round trip)
//   end
// Keys and tensors are written in lexicographic order.
struct Checkpoint {
  static constexpr int kVersion = 1;

  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor> tensors;

  void save(const std::filesystem::path &path) const;
  static Checkpoint load(const std::filesystem::path &path);
};

} // namespace hf::ad
