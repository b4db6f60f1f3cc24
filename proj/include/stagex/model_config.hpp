// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef STAGEX_MODEL_CONFIG_HPP_
#define STAGEX_MODEL_CONFIG_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace stagex {

// Every architectural hyperparameter. Filter lengths are in samples at 8 kHz;
// all scales share the stride filter_lengths[0] / 2.
struct ModelConfig {
  std::array<int, 3> filter_lengths{20, 80, 160};
  int encoder_channels = 64;
  int tcn_blocks_per_stack = 4;
  int tcn_stacks = 2;
  int tcn_channels = 128;
  int tcn_kernel = 3;
  int bottleneck_channels = 64;
  std::vector<int> resnet_blocks{32, 32, 64};
  int embed_dim = 32;
  int num_speakers = 4;
  int num_stages = 1;
  std::array<double, 3> fusion_init{0.8, 0.1, 0.1};
  // Reference signals consumed by stages k >= 2.
  bool use_utt = true;    // utterance embedding from [reference, previous estimate]
  bool use_frame = false;  // frame embedding of the previous estimate

  int stride() const { return filter_lengths[0] / 2; }
  // Frames emitted by the speech encoder for a signal of `length` samples.
  long FrameCount(long length) const;
  // Throws ConfigError on violated invariants.
  void Validate() const;

  // Desk-scale two-stage network using both reference signals.
  static ModelConfig Toy();
  // Full-size network (256-dim embeddings, 4 x 8 TCN blocks, three stages).
  static ModelConfig FullScale();
  static ModelConfig Preset(const std::string &name);
};

nlohmann::ordered_json ToJson(const ModelConfig &config);
// Rejects unknown keys; missing keys keep their defaults.
ModelConfig ModelConfigFromJson(const nlohmann::json &j);

}  // namespace stagex

#endif  // STAGEX_MODEL_CONFIG_HPP_
