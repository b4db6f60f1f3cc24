// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Single JSON file driving every CLI command:
//
//   {
//     "data_dir": "data",              corpus output / manifest location
//     "run_dir": "runs/toy",           checkpoints, state, history, reports
//     "max_examples_per_epoch": 0,     0 = whole training split
//     "corpus": { CorpusConfig keys },
//     "model":  { ModelConfig keys },
//     "train":  { TrainConfig keys }
//   }
//
// Missing keys take their defaults (model defaults are the toy preset);
// unknown keys are rejected. model.num_speakers follows the corpus's training
// roster when omitted and must match it when given.

#ifndef STAGEX_RUN_CONFIG_HPP_
#define STAGEX_RUN_CONFIG_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "stagex/dataset.hpp"
#include "stagex/model_config.hpp"
#include "stagex/training.hpp"

namespace stagex {

struct RunConfig {
  std::string data_dir = "data";
  std::string run_dir = "run";
  int max_examples_per_epoch = 0;
  CorpusConfig corpus;
  ModelConfig model = ModelConfig::Toy();
  TrainConfig train;

  void Validate() const;  // ConfigError
};

nlohmann::ordered_json ToJson(const RunConfig &config);
RunConfig RunConfigFromJson(const nlohmann::json &j);
RunConfig LoadRunConfig(const std::filesystem::path &path);
void SaveRunConfig(const RunConfig &config, const std::filesystem::path &path);

// Flat override keys, e.g. "num_stages", "use_frame", "data_dir". Every leaf
// of the JSON layout is addressable by its own name; "num_speakers" means the
// corpus roster size.
std::vector<std::string> RunConfigKeys();

// `key` may be snake_case or kebab-case. `value` is parsed as JSON when
// possible, else taken as a string; list keys also accept "a,b,c".
void ApplyOverride(RunConfig &config, const std::string &key, const std::string &value);
nlohmann::json GetConfigValue(const RunConfig &config, const std::string &key);

}  // namespace stagex

#endif  // STAGEX_RUN_CONFIG_HPP_
