// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/model_config.hpp"

#include <cmath>
#include <set>

#include "stagex/error.hpp"

namespace stagex {

long ModelConfig::FrameCount(long length) const {
  const long l1 = filter_lengths[0];
  if (length < l1) return 0;
  return (length - l1) / stride() + 1;
}

void ModelConfig::Validate() const {
  auto fail = [](const std::string &msg) { throw ConfigError("model config: " + msg); };
  const auto &l = filter_lengths;
  if (l[0] < 2 || l[0] % 2 != 0) fail("filter_lengths[0] must be even and >= 2");
  if (!(l[0] < l[1] && l[1] < l[2])) fail("filter_lengths must be strictly increasing");
  if (l[1] % stride() != 0 || l[2] % stride() != 0) {
    fail("filter_lengths[1..2] must be multiples of filter_lengths[0] / 2");
  }
  if (encoder_channels < 1 || tcn_blocks_per_stack < 1 || tcn_stacks < 1 ||
      tcn_channels < 1 || bottleneck_channels < 1 || embed_dim < 1 ||
      num_speakers < 1) {
    fail("channel counts, depths and num_speakers must be >= 1");
  }
  if (tcn_kernel < 1 || tcn_kernel % 2 == 0) fail("tcn_kernel must be odd");
  if (resnet_blocks.empty()) fail("resnet_blocks must not be empty");
  for (int w : resnet_blocks) {
    if (w < 1) fail("resnet_blocks widths must be >= 1");
  }
  if (num_stages < 1) fail("num_stages must be >= 1");
  for (double w : fusion_init) {
    if (!std::isfinite(w)) fail("fusion_init must be finite");
  }
  if (num_stages == 1 && use_frame) {
    // A frame reference only exists once a previous estimate does.
    fail("use_frame requires num_stages >= 2");
  }
}

ModelConfig ModelConfig::Toy() {
  ModelConfig c;
  c.num_stages = 2;
  c.use_frame = true;
  return c;
}

ModelConfig ModelConfig::FullScale() {
  ModelConfig c;
  c.encoder_channels = 256;
  c.tcn_blocks_per_stack = 8;
  c.tcn_stacks = 4;
  c.tcn_channels = 512;
  c.bottleneck_channels = 256;
  c.resnet_blocks = {256, 256, 512};
  c.embed_dim = 256;
  c.num_speakers = 101;
  c.num_stages = 3;
  c.use_frame = true;
  return c;
}

ModelConfig ModelConfig::Preset(const std::string &name) {
  if (name == "toy") return Toy();
  if (name == "full") return FullScale();
  throw ConfigError("unknown model preset '" + name + "' (expected toy|full)");
}

nlohmann::ordered_json ToJson(const ModelConfig &c) {
  nlohmann::ordered_json j;
  j["filter_lengths"] = c.filter_lengths;
  j["encoder_channels"] = c.encoder_channels;
  j["tcn_blocks_per_stack"] = c.tcn_blocks_per_stack;
  j["tcn_stacks"] = c.tcn_stacks;
  j["tcn_channels"] = c.tcn_channels;
  j["tcn_kernel"] = c.tcn_kernel;
  j["bottleneck_channels"] = c.bottleneck_channels;
  j["resnet_blocks"] = c.resnet_blocks;
  j["embed_dim"] = c.embed_dim;
  j["num_speakers"] = c.num_speakers;
  j["num_stages"] = c.num_stages;
  j["fusion_init"] = c.fusion_init;
  j["use_utt"] = c.use_utt;
  j["use_frame"] = c.use_frame;
  return j;
}

ModelConfig ModelConfigFromJson(const nlohmann::json &j) {
  static const std::set<std::string> kKeys = {
      "filter_lengths", "encoder_channels", "tcn_blocks_per_stack",
      "tcn_stacks", "tcn_channels", "tcn_kernel", "bottleneck_channels",
      "resnet_blocks", "embed_dim", "num_speakers", "num_stages",
      "fusion_init", "use_utt", "use_frame"};
  if (!j.is_object()) throw ConfigError("model config: expected an object");
  for (const auto &[key, _] : j.items()) {
    if (!kKeys.count(key)) throw ConfigError("model config: unknown key '" + key + "'");
  }
  ModelConfig c;
  try {
    auto get = [&j](const char *key, auto &field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("filter_lengths", c.filter_lengths);
    get("encoder_channels", c.encoder_channels);
    get("tcn_blocks_per_stack", c.tcn_blocks_per_stack);
    get("tcn_stacks", c.tcn_stacks);
    get("tcn_channels", c.tcn_channels);
    get("tcn_kernel", c.tcn_kernel);
    get("bottleneck_channels", c.bottleneck_channels);
    get("resnet_blocks", c.resnet_blocks);
    get("embed_dim", c.embed_dim);
    get("num_speakers", c.num_speakers);
    get("num_stages", c.num_stages);
    get("fusion_init", c.fusion_init);
    get("use_utt", c.use_utt);
    get("use_frame", c.use_frame);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

}  // namespace stagex
