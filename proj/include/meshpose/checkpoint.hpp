#pragma once

#include <string>
#include <utility>
#include <vector>

#include "meshpose/tensor.hpp"

namespace meshpose {

// Named-parameter store: a JSON manifest (names, shapes, byte offsets,
// config echo, format version) next to one raw little-endian float64 blob.
struct Checkpoint {
  int format_version = 1;
  std::string phase;
  int64_t step = 0;
  std::string config_json;  // echo of the training configuration
  std::vector<std::pair<std::string, Tensor>> params;     // sorted by name
  std::vector<std::pair<std::string, Tensor>> opt_state;  // sorted by name

  const Tensor* find_param(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& dir);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace meshpose
