#include "meshpose/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace meshpose {

void TrainConfig::validate() const {
  if (batch_size <= 0) throw std::invalid_argument("config: batch_size must be positive");
  if (!(lr_pretrain > 0) || !(lr_finetune > 0))
    throw std::invalid_argument("config: learning rates must be positive");
  if (steps_phase_a < 0 || steps_phase_b < 0 || steps_phase_c < 0 || steps_weak_a < 0 ||
      steps_weak_b < 0)
    throw std::invalid_argument("config: step counts must be nonnegative");
  if (template_vertices < 470)
    throw std::invalid_argument("config: template_vertices too small for the landmark table");
  weights.validate();
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key or value");

    auto as_i64 = [&] { return int64_t(std::stoll(value)); };
    auto as_f64 = [&] { return std::stod(value); };
    auto as_bool = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected a boolean");
    };

    if (key == "batch_size") cfg.batch_size = as_i64();
    else if (key == "lr_pretrain") cfg.lr_pretrain = as_f64();
    else if (key == "lr_finetune") cfg.lr_finetune = as_f64();
    else if (key == "steps_phase_a") cfg.steps_phase_a = as_i64();
    else if (key == "steps_phase_b") cfg.steps_phase_b = as_i64();
    else if (key == "steps_phase_c") cfg.steps_phase_c = as_i64();
    else if (key == "steps_weak_a") cfg.steps_weak_a = as_i64();
    else if (key == "steps_weak_b") cfg.steps_weak_b = as_i64();
    else if (key == "seed") cfg.seed = uint64_t(std::stoull(value));
    else if (key == "shuffle") cfg.shuffle = as_bool();
    else if (key == "template") cfg.template_kind = value;
    else if (key == "template_vertices") cfg.template_vertices = as_i64();
    else if (key == "lambda_v") cfg.weights.lambda_v = as_f64();
    else if (key == "lambda_n") cfg.weights.lambda_n = as_f64();
    else if (key == "lambda_e") cfg.weights.lambda_e = as_f64();
    else if (key == "lambda_l") cfg.weights.lambda_l = as_f64();
    else if (key == "lambda_h") cfg.weights.lambda_h = as_f64();
    else if (key == "lambda_m") cfg.weights.lambda_m = as_f64();
    else if (key == "lambda_j") cfg.weights.lambda_j = as_f64();
    else if (key == "weak_lambda_h") cfg.weights.weak_lambda_h = as_f64();
    else if (key == "weak_lambda_d") cfg.weights.weak_lambda_d = as_f64();
    else if (key == "weak_lambda_pm") cfg.weights.weak_lambda_pm = as_f64();
    else if (key == "weak_lambda_j") cfg.weights.weak_lambda_j = as_f64();
    else if (key == "latent_width") cfg.net.latent_width = as_i64();
    else throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["batch_size"] = cfg.batch_size;
  j["lr_pretrain"] = cfg.lr_pretrain;
  j["lr_finetune"] = cfg.lr_finetune;
  j["steps_phase_a"] = cfg.steps_phase_a;
  j["steps_phase_b"] = cfg.steps_phase_b;
  j["steps_phase_c"] = cfg.steps_phase_c;
  j["steps_weak_a"] = cfg.steps_weak_a;
  j["steps_weak_b"] = cfg.steps_weak_b;
  j["seed"] = cfg.seed;
  j["shuffle"] = cfg.shuffle;
  j["template"] = cfg.template_kind;
  j["template_vertices"] = cfg.template_vertices;
  j["lambda_v"] = cfg.weights.lambda_v;
  j["lambda_n"] = cfg.weights.lambda_n;
  j["lambda_e"] = cfg.weights.lambda_e;
  j["lambda_l"] = cfg.weights.lambda_l;
  j["lambda_h"] = cfg.weights.lambda_h;
  j["lambda_m"] = cfg.weights.lambda_m;
  j["lambda_j"] = cfg.weights.lambda_j;
  j["weak_lambda_h"] = cfg.weights.weak_lambda_h;
  j["weak_lambda_d"] = cfg.weights.weak_lambda_d;
  j["weak_lambda_pm"] = cfg.weights.weak_lambda_pm;
  j["weak_lambda_j"] = cfg.weights.weak_lambda_j;
  j["latent_width"] = cfg.net.latent_width;
  return j.dump();
}

TrainConfig config_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  TrainConfig cfg;
  cfg.batch_size = j.at("batch_size").get<int64_t>();
  cfg.lr_pretrain = j.at("lr_pretrain").get<double>();
  cfg.lr_finetune = j.at("lr_finetune").get<double>();
  cfg.steps_phase_a = j.at("steps_phase_a").get<int64_t>();
  cfg.steps_phase_b = j.at("steps_phase_b").get<int64_t>();
  cfg.steps_phase_c = j.at("steps_phase_c").get<int64_t>();
  cfg.steps_weak_a = j.at("steps_weak_a").get<int64_t>();
  cfg.steps_weak_b = j.at("steps_weak_b").get<int64_t>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.shuffle = j.at("shuffle").get<bool>();
  cfg.template_kind = j.at("template").get<std::string>();
  cfg.template_vertices = j.at("template_vertices").get<int64_t>();
  cfg.weights.lambda_v = j.at("lambda_v").get<double>();
  cfg.weights.lambda_n = j.at("lambda_n").get<double>();
  cfg.weights.lambda_e = j.at("lambda_e").get<double>();
  cfg.weights.lambda_l = j.at("lambda_l").get<double>();
  cfg.weights.lambda_h = j.at("lambda_h").get<double>();
  cfg.weights.lambda_m = j.at("lambda_m").get<double>();
  cfg.weights.lambda_j = j.at("lambda_j").get<double>();
  cfg.weights.weak_lambda_h = j.at("weak_lambda_h").get<double>();
  cfg.weights.weak_lambda_d = j.at("weak_lambda_d").get<double>();
  cfg.weights.weak_lambda_pm = j.at("weak_lambda_pm").get<double>();
  cfg.weights.weak_lambda_j = j.at("weak_lambda_j").get<double>();
  cfg.net.latent_width = j.at("latent_width").get<int64_t>();
  cfg.validate();
  return cfg;
}

}  // namespace meshpose
