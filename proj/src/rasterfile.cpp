#include "meshpose/rasterfile.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "raster i/o assumes a little-endian host");

namespace meshpose {

namespace {

void write_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::ifstream& in, const std::string& path) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error("truncated raster file " + path);
  return v;
}

}  // namespace

void write_rast(const std::string& path, const std::vector<uint32_t>& dims,
                const std::vector<float>& data) {
  uint64_t n = 1;
  for (uint32_t d : dims) n *= d;
  if (n != data.size()) throw std::invalid_argument("rast: dims do not match payload size");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("RAST", 4);
  write_u32(out, uint32_t(dims.size()));
  for (uint32_t d : dims) write_u32(out, d);
  out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * 4));
  if (!out) throw std::runtime_error("write failed: " + path);
}

RastFile read_rast(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RAST", 4) != 0)
    throw std::runtime_error("bad RAST magic in " + path);
  uint32_t ndims = read_u32(in, path);
  if (ndims == 0 || ndims > 8) throw std::runtime_error("implausible RAST rank in " + path);
  RastFile f;
  uint64_t n = 1;
  for (uint32_t i = 0; i < ndims; ++i) {
    f.dims.push_back(read_u32(in, path));
    n *= f.dims.back();
  }
  f.data.resize(n);
  if (!in.read(reinterpret_cast<char*>(f.data.data()), std::streamsize(n * 4)))
    throw std::runtime_error("truncated RAST payload in " + path);
  return f;
}

void write_dpth(const std::string& path, const DepthMap& map) {
  if (int(map.values.size()) != map.width * map.height)
    throw std::invalid_argument("dpth: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("DPTH", 4);
  write_u32(out, uint32_t(map.width));
  write_u32(out, uint32_t(map.height));
  std::vector<float> f(map.values.begin(), map.values.end());
  out.write(reinterpret_cast<const char*>(f.data()), std::streamsize(f.size() * 4));
  if (!out) throw std::runtime_error("write failed: " + path);
}

DepthMap read_dpth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "DPTH", 4) != 0)
    throw std::runtime_error("bad DPTH magic in " + path);
  DepthMap m;
  m.width = int(read_u32(in, path));
  m.height = int(read_u32(in, path));
  if (m.width <= 0 || m.height <= 0 || m.width > 1 << 16 || m.height > 1 << 16)
    throw std::runtime_error("implausible DPTH size in " + path);
  std::vector<float> f(size_t(m.width) * size_t(m.height));
  if (!in.read(reinterpret_cast<char*>(f.data()), std::streamsize(f.size() * 4)))
    throw std::runtime_error("truncated DPTH payload in " + path);
  m.values.assign(f.begin(), f.end());
  return m;
}

}  // namespace meshpose
