// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <random>

#include "gradcheck_util.hpp"
#include "oracles.hpp"
#include "stagex/error.hpp"
#include "stagex/multistage.hpp"
#include "stagex/network.hpp"

using namespace stagex;
using testutil::RandomMatrix;

namespace {

ModelConfig Tiny() {
  ModelConfig c;
  c.filter_lengths = {8, 32, 64};
  c.encoder_channels = 6;
  c.tcn_blocks_per_stack = 2;
  c.tcn_stacks = 1;
  c.tcn_channels = 8;
  c.bottleneck_channels = 6;
  c.resnet_blocks = {6, 8};
  c.embed_dim = 5;
  c.num_speakers = 3;
  c.num_stages = 2;
  c.use_frame = true;
  return c;
}

ModelConfig RandomConfig(std::mt19937_64 &rng) {
  ModelConfig c = Tiny();
  const int l1 = std::uniform_int_distribution<int>(1, 6)(rng) * 4;  // 4..24, even
  const int s = l1 / 2;
  c.filter_lengths = {l1, l1 + s * std::uniform_int_distribution<int>(1, 4)(rng), 0};
  c.filter_lengths[2] = c.filter_lengths[1] + s * std::uniform_int_distribution<int>(1, 6)(rng);
  c.encoder_channels = std::uniform_int_distribution<int>(2, 8)(rng);
  c.bottleneck_channels = std::uniform_int_distribution<int>(2, 6)(rng);
  c.embed_dim = std::uniform_int_distribution<int>(2, 6)(rng);
  return c;
}

}  // namespace

TEST_CASE("shape and alignment contracts over 50 random (length, config) combinations") {
  std::mt19937_64 rng(2026);
  for (int trial = 0; trial < 50; ++trial) {
    ModelConfig c = RandomConfig(rng);
    REQUIRE_NOTHROW(c.Validate());
    const long len = std::uniform_int_distribution<long>(c.filter_lengths[2], 700)(rng);
    const long ref_len = std::uniform_int_distribution<long>(c.filter_lengths[2], 500)(rng);
    CAPTURE(trial);
    CAPTURE(len);
    Model model(c, static_cast<std::uint64_t>(trial));
    ag::NoGradGuard guard;
    ag::Var mix = ag::Constant(RandomMatrix(rng, 1, len, 0.3));
    ag::Var ref = ag::Constant(RandomMatrix(rng, 1, ref_len, 0.3));

    const long frames = oracle::FrameCount(len, c.filter_lengths[0]);
    CHECK(c.FrameCount(len) == frames);
    MultiScaleEncoding enc = model.speech_encoder().Encode(mix);
    CHECK(enc.frame_count == frames);
    CHECK(enc.frame_stride == c.filter_lengths[0] / 2);
    for (const ag::Var &f : enc.features) {
      CHECK(f.rows() == c.encoder_channels);
      CHECK(f.cols() == frames);
      CHECK(f.value().minCoeff() >= 0.0);
    }

    SpeakerOutput spk = model.speaker_encoder().Encode(model.speech_encoder().Encode(ref));
    CHECK(spk.embedding.vector.rows() == c.embed_dim);
    CHECK(spk.embedding.vector.cols() == 1);
    CHECK(spk.logits.rows() == c.num_speakers);

    PipelineOutput out = ForwardPipeline(model, mix, ref);
    REQUIRE(out.stages.size() == 2);
    for (const StageOutput &st : out.stages) {
      for (const ag::Var &e : st.per_scale_estimates) {
        CHECK(e.rows() == 1);
        CHECK(e.cols() == len);
      }
      CHECK(st.fused.cols() == len);
    }
    REQUIRE(out.stages[1].frame_embedding.has_value());
    const FrameEmbedding &fe = *out.stages[1].frame_embedding;
    CHECK(fe.frame_count() == enc.frame_count);
    CHECK(fe.features.rows() == 3 * c.encoder_channels);

    MaskSet masks = model.stage(2).extractor.Extract(enc, spk.embedding, &fe);
    for (const ag::Var &m : masks.masks) {
      CHECK(m.rows() == c.encoder_channels);
      CHECK(m.cols() == frames);
      CHECK(m.value().minCoeff() >= 0.0);
    }
    auto decoded = model.stage(2).decoder.Decode(enc, masks, len);
    for (const ag::Var &d : decoded) CHECK(d.cols() == len);
  }
}

TEST_CASE("encoder rejects inputs shorter than the longest filter") {
  ModelConfig c = Tiny();
  Model model(c, 1);
  ag::Var shortwave = ag::Constant(ag::Matrix::Ones(1, 63));
  CHECK_THROWS_AS(model.speech_encoder().Encode(shortwave), ArgumentError);
  CHECK_NOTHROW(model.speech_encoder().Encode(ag::Constant(ag::Matrix::Ones(1, 64))));
}

TEST_CASE("silence encodes to zero and zero masks decode to silence") {
  ModelConfig c = Tiny();
  Model model(c, 3);
  ag::NoGradGuard guard;
  MultiScaleEncoding enc = model.speech_encoder().Encode(ag::Constant(ag::Matrix::Zero(1, 200)));
  for (const ag::Var &f : enc.features) CHECK(f.value().isZero(0.0));

  std::mt19937_64 rng(4);
  MultiScaleEncoding mix = model.speech_encoder().Encode(ag::Constant(RandomMatrix(rng, 1, 200)));
  MaskSet zero;
  for (auto &m : zero.masks) m = ag::Constant(ag::Matrix::Zero(c.encoder_channels, mix.frame_count));
  for (const ag::Var &d : model.stage(1).decoder.Decode(mix, zero, 200)) {
    CHECK(d.value().isZero(0.0));
  }
}

TEST_CASE("absent frame reference equals an all-zero one") {
  ModelConfig c = Tiny();
  Model model(c, 5);
  std::mt19937_64 rng(6);
  ag::NoGradGuard guard;
  MultiScaleEncoding mix = model.speech_encoder().Encode(ag::Constant(RandomMatrix(rng, 1, 300)));
  SpeakerOutput spk = model.speaker_encoder().Encode(
      model.speech_encoder().Encode(ag::Constant(RandomMatrix(rng, 1, 240))));
  FrameEmbedding zero{ag::Constant(ag::Matrix::Zero(3 * c.encoder_channels, mix.frame_count))};
  MaskSet a = model.stage(2).extractor.Extract(mix, spk.embedding, nullptr);
  MaskSet b = model.stage(2).extractor.Extract(mix, spk.embedding, &zero);
  for (int i = 0; i < 3; ++i) CHECK(a.masks[i].value() == b.masks[i].value());
}

TEST_CASE("encoder weights pass a finite-difference check through decoding") {
  ModelConfig c = Tiny();
  Model model(c, 7);
  std::mt19937_64 rng(8);
  ag::Var wave = ag::Constant(RandomMatrix(rng, 1, 120));
  MaskSet masks;
  const long frames = c.FrameCount(120);
  for (auto &m : masks.masks) {
    m = ag::Constant(RandomMatrix(rng, c.encoder_channels, frames).cwiseAbs());
  }
  ag::Matrix p = RandomMatrix(rng, 1, 120);
  const Model &m = model;
  auto f = [&] {
    auto out = m.stage(1).decoder.Decode(m.speech_encoder().Encode(wave), masks, 120);
    std::vector<ag::Var> parts(out.begin(), out.end());
    return testutil::Project(ag::Sum(parts), p);
  };
  std::vector<ag::Var> weights(model.speech_encoder().weights().begin(),
                               model.speech_encoder().weights().end());
  CHECK(testutil::MaxGradError(weights, f, 1e-6) < 1e-4);
}
