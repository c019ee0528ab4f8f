#pragma once

#include <string>

#include "meshpose/layers.hpp"
#include "meshpose/losses.hpp"

namespace meshpose {

struct TrainConfig {
  int64_t batch_size = 32;
  double lr_pretrain = 1e-3;
  double lr_finetune = 1e-4;
  int64_t steps_phase_a = 300;
  int64_t steps_phase_b = 200;
  int64_t steps_phase_c = 500;
  int64_t steps_weak_a = 100;
  int64_t steps_weak_b = 300;
  uint64_t seed = 1;
  bool shuffle = false;  // batches walk the manifest order unless enabled
  std::string template_kind = "sphere-grid";
  int64_t template_vertices = 1280;
  LossWeights weights;
  NetConfig net;

  void validate() const;
};

// Flat `key = value` text, '#' comments, unknown keys rejected. Keys are
// documented in the README.
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config_file(const std::string& path);

std::string config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& json_text);

}  // namespace meshpose
