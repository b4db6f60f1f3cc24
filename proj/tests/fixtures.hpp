// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Tiny models and in-memory mixtures for fast training-path tests.

#ifndef STAGEX_TESTS_FIXTURES_HPP_
#define STAGEX_TESTS_FIXTURES_HPP_

#include <vector>

#include "stagex/dataset.hpp"
#include "stagex/model_config.hpp"

namespace testutil {

inline stagex::ModelConfig TinyModel(int stages = 2, bool frame = true) {
  stagex::ModelConfig c;
  c.filter_lengths = {8, 32, 64};
  c.encoder_channels = 6;
  c.tcn_blocks_per_stack = 2;
  c.tcn_stacks = 1;
  c.tcn_channels = 8;
  c.bottleneck_channels = 6;
  c.resnet_blocks = {6, 8};
  c.embed_dim = 5;
  c.num_speakers = 3;
  c.num_stages = stages;
  c.use_frame = frame;
  return c;
}

// `count` two-talker mixtures of `seconds` each over speakers 0..2.
inline std::vector<stagex::MixtureExample> TinyExamples(int count, double seconds = 0.1,
                                                        int seed = 0) {
  using namespace stagex;
  std::vector<MixtureExample> out;
  for (int i = 0; i < count; ++i) {
    const int spk = i % 3, other = (i + 1) % 3;
    const auto s = static_cast<std::uint64_t>(seed * 1000 + i * 3);
    MixResult mix = MixAtSnr(RenderUtterance(MakeSpeakerProfile(spk, 1), seconds, s + 1),
                             RenderUtterance(MakeSpeakerProfile(other, 1), seconds, s + 2), 1.0);
    MixtureExample ex;
    ex.mixture = mix.mixture;
    ex.target = mix.target;
    ex.interferer = mix.scaled_interferer;
    ex.reference = RenderUtterance(MakeSpeakerProfile(spk, 1), seconds, s + 3);
    ex.speaker_id = spk;
    out.push_back(ex);
  }
  return out;
}

}  // namespace testutil

#endif  // STAGEX_TESTS_FIXTURES_HPP_
