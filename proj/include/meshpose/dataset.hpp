#pragma once

#include <string>
#include <vector>

#include "meshpose/synth.hpp"

namespace meshpose {

// Directory layout: manifest.jsonl (one JSON record per sample), camera.json,
// and per-sample blobs NNNNNN.img.f32 / NNNNNN.hm.f32 (RAST rasters),
// NNNNNN.mesh.obj, NNNNNN.depth.dpth. Bytes are fully determined by
// (template, seed0, count, camera).
struct DatasetWriteReport {
  int64_t written = 0;
};

DatasetWriteReport write_dataset(const std::string& dir, const TemplateMesh& tmpl, int64_t count,
                                 uint64_t seed0, const GenParams& gp);

struct Dataset {
  TemplateMesh tmpl;
  GenParams gen;
  std::vector<Sample> samples;

  struct Skip {
    int64_t index;
    std::string reason;
  };
  std::vector<Skip> skipped;
};

// Reads the manifest and reconstructs every sample. The mesh is the source
// of truth (OBJ text round-trips doubles exactly); derived quantities are
// recomputed and the stored rasters are validated against them, so corrupt
// or missing blobs are detected, reported and skipped.
Dataset read_dataset(const std::string& dir);

}  // namespace meshpose
