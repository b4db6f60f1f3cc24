// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "stagex/error.hpp"

namespace stagex {

namespace {

constexpr const char *kSections[] = {"corpus", "model", "train"};

std::string Snake(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

nlohmann::json ParseScalar(const std::string &text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception &) {
    return text;
  }
}

}  // namespace

void RunConfig::Validate() const {
  if (data_dir.empty()) throw ConfigError("data_dir must not be empty");
  if (run_dir.empty()) throw ConfigError("run_dir must not be empty");
  if (max_examples_per_epoch < 0) throw ConfigError("max_examples_per_epoch must be >= 0");
  try {
    corpus.Validate();
  } catch (const ArgumentError &e) {
    throw ConfigError(std::string("corpus: ") + e.what());
  }
  model.Validate();
  train.Validate();
  if (model.num_speakers != corpus.train_speakers()) {
    throw ConfigError("model.num_speakers (" + std::to_string(model.num_speakers) +
                      ") must equal the number of training speakers (" +
                      std::to_string(corpus.train_speakers()) + ")");
  }
}

nlohmann::ordered_json ToJson(const RunConfig &c) {
  nlohmann::ordered_json j;
  j["data_dir"] = c.data_dir;
  j["run_dir"] = c.run_dir;
  j["max_examples_per_epoch"] = c.max_examples_per_epoch;
  j["corpus"] = ToJson(c.corpus);
  j["model"] = ToJson(c.model);
  j["train"] = ToJson(c.train);
  return j;
}

RunConfig RunConfigFromJson(const nlohmann::json &j) {
  if (!j.is_object()) throw ConfigError("run config: expected a JSON object");
  RunConfig c;
  for (const auto &[key, value] : j.items()) {
    if (key == "data_dir" || key == "run_dir") {
      if (!value.is_string()) throw ConfigError("run config: '" + key + "' must be a string");
      (key == "data_dir" ? c.data_dir : c.run_dir) = value.get<std::string>();
    } else if (key == "max_examples_per_epoch") {
      if (!value.is_number_integer()) {
        throw ConfigError("run config: 'max_examples_per_epoch' must be an integer");
      }
      c.max_examples_per_epoch = value.get<int>();
    } else if (key == "corpus") {
      c.corpus = CorpusConfigFromJson(value);
    } else if (key == "train") {
      c.train = TrainConfigFromJson(value);
    } else if (key != "model") {
      throw ConfigError("run config: unknown key '" + key + "'");
    }
  }
  // Model keys are layered over the toy preset.
  nlohmann::json model = ToJson(ModelConfig::Toy());
  model["num_speakers"] = c.corpus.train_speakers();
  if (j.contains("model")) {
    if (!j.at("model").is_object()) throw ConfigError("run config: 'model' must be an object");
    for (const auto &[key, value] : j.at("model").items()) model[key] = value;
  }
  c.model = ModelConfigFromJson(model);
  c.Validate();
  return c;
}

RunConfig LoadRunConfig(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return RunConfigFromJson(j);
}

void SaveRunConfig(const RunConfig &config, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write " + path.string());
  out << ToJson(config).dump(2) << '\n';
}

std::vector<std::string> RunConfigKeys() {
  const nlohmann::ordered_json j = ToJson(RunConfig{});
  std::vector<std::string> keys;
  for (const auto &[key, value] : j.items()) {
    if (!value.is_object()) keys.push_back(key);
  }
  for (const char *section : kSections) {
    for (const auto &[key, value] : j.at(section).items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
  }
  return keys;
}

namespace {

// Locates a flat key in the nested layout; nullptr if unknown.
nlohmann::ordered_json *FindSlot(nlohmann::ordered_json &j, const std::string &key) {
  if (j.contains(key) && !j.at(key).is_object()) return &j[key];
  for (const char *section : kSections) {
    if (j.at(section).contains(key)) return &j[section][key];
  }
  return nullptr;
}

}  // namespace

nlohmann::json GetConfigValue(const RunConfig &config, const std::string &raw_key) {
  nlohmann::ordered_json j = ToJson(config);
  nlohmann::ordered_json *slot = FindSlot(j, Snake(raw_key));
  if (slot == nullptr) throw ConfigError("unknown config key '" + raw_key + "'");
  return *slot;
}

void ApplyOverride(RunConfig &config, const std::string &raw_key, const std::string &value) {
  nlohmann::ordered_json j = ToJson(config);
  nlohmann::ordered_json *slot = FindSlot(j, Snake(raw_key));
  if (slot == nullptr) throw ConfigError("unknown config key '" + raw_key + "'");

  nlohmann::json parsed = ParseScalar(value);
  if (slot->is_array() && !parsed.is_array()) {
    nlohmann::json list = nlohmann::json::array();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) list.push_back(ParseScalar(item));
    }
    parsed = list;
  }
  if (slot->is_string() && !parsed.is_string()) parsed = value;
  *slot = parsed;
  // The classifier size follows the (possibly changed) training roster.
  j["model"].erase("num_speakers");
  config = RunConfigFromJson(j);
}

}  // namespace stagex
