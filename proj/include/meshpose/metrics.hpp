#pragma once

#include <string>
#include <vector>

#include "meshpose/dataset.hpp"

namespace meshpose {

struct EvalReport {
  double mesh_error = 0;  // mean over samples of mean vertex distance
  double pose_error = 0;  // mean over samples of mean joint distance
  double auc = 0;         // normalized trapezoid over the PCK curve
  std::vector<std::pair<double, double>> pck;  // (threshold, fraction), ascending

  struct PerSample {
    int64_t index;
    double mesh_error;
    double pose_error;
  };
  std::vector<PerSample> per_sample;
};

// Metric core: predictions in camera-frame coordinates (known root depth and
// scale already applied). Rejects an empty dataset.
EvalReport evaluate_predictions(const std::vector<Tensor>& pred_meshes,
                                const std::vector<Tensor>& pred_joints, const Dataset& ds,
                                const std::vector<double>& thresholds);

// "20:50:5" -> {20, 25, ..., 50}; a bare number is a single threshold
std::vector<double> parse_thresholds(const std::string& spec);

std::string report_to_json(const EvalReport& report);

}  // namespace meshpose
