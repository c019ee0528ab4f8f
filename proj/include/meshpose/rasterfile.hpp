#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meshpose/render.hpp"

namespace meshpose {

// Raw float raster: magic "RAST", then the number of dimensions and each
// dimension as 32-bit little-endian unsigned integers, then the payload as
// little-endian 32-bit floats.
void write_rast(const std::string& path, const std::vector<uint32_t>& dims,
                const std::vector<float>& data);
struct RastFile {
  std::vector<uint32_t> dims;
  std::vector<float> data;
};
RastFile read_rast(const std::string& path);

// Depth raster: magic "DPTH", width and height as 32-bit little-endian
// unsigned integers, then row-major little-endian 32-bit floats.
void write_dpth(const std::string& path, const DepthMap& map);
DepthMap read_dpth(const std::string& path);

}  // namespace meshpose
