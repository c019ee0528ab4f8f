#include "meshpose/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <filesystem>
#include <fstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs assume a little-endian host");

namespace meshpose {

namespace fs = std::filesystem;

const Tensor* Checkpoint::find_param(const std::string& name) const {
  for (const auto& [n, t] : params) {
    if (n == name) return &t;
  }
  return nullptr;
}

namespace {

nlohmann::json entry_list(const std::vector<std::pair<std::string, Tensor>>& items,
                          int64_t* offset) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, t] : items) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["offset"] = *offset;
    arr.push_back(std::move(e));
    *offset += t.numel() * int64_t(sizeof(double));
  }
  return arr;
}

void read_entries(const nlohmann::json& arr, std::ifstream& blob, const std::string& path,
                  std::vector<std::pair<std::string, Tensor>>* out) {
  for (const auto& e : arr) {
    Shape shape = e.at("shape").get<Shape>();
    int64_t offset = e.at("offset").get<int64_t>();
    Tensor t(shape);
    blob.seekg(offset);
    if (!blob.read(reinterpret_cast<char*>(t.mut()), std::streamsize(t.numel() * 8)))
      throw std::runtime_error("checkpoint blob truncated: " + path);
    out->push_back({e.at("name").get<std::string>(), std::move(t)});
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& dir) {
  fs::create_directories(dir);

  auto sorted = [](std::vector<std::pair<std::string, Tensor>> v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return v;
  };
  auto params = sorted(ckpt.params);
  auto opt = sorted(ckpt.opt_state);

  int64_t offset = 0;
  nlohmann::json manifest;
  manifest["format_version"] = ckpt.format_version;
  manifest["phase"] = ckpt.phase;
  manifest["step"] = ckpt.step;
  manifest["config"] =
      ckpt.config_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(ckpt.config_json);
  manifest["params"] = entry_list(params, &offset);
  manifest["opt_state"] = entry_list(opt, &offset);
  manifest["blob"] = "params.blob";

  std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot write checkpoint manifest in " + dir);
  mf << manifest.dump(2) << "\n";

  std::ofstream blob(fs::path(dir) / "params.blob", std::ios::binary);
  if (!blob) throw std::runtime_error("cannot write checkpoint blob in " + dir);
  for (const auto& [name, t] : params)
    blob.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.numel() * 8));
  for (const auto& [name, t] : opt)
    blob.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.numel() * 8));
  if (!blob) throw std::runtime_error("checkpoint blob write failed in " + dir);
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw std::runtime_error("no checkpoint manifest in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(mf);

  Checkpoint ckpt;
  ckpt.format_version = manifest.at("format_version").get<int>();
  if (ckpt.format_version != 1)
    throw std::runtime_error("unsupported checkpoint format version in " + dir);
  ckpt.phase = manifest.at("phase").get<std::string>();
  ckpt.step = manifest.at("step").get<int64_t>();
  ckpt.config_json = manifest.at("config").dump();

  std::string blob_path = (fs::path(dir) / manifest.at("blob").get<std::string>()).string();
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("no checkpoint blob at " + blob_path);
  read_entries(manifest.at("params"), blob, blob_path, &ckpt.params);
  read_entries(manifest.at("opt_state"), blob, blob_path, &ckpt.opt_state);
  return ckpt;
}

}  // namespace meshpose
