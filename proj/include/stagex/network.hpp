// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Single-stage building blocks: the multi-scale speech encoder shared by every
// call site, the ResNet speaker encoder with its classification head, the TCN
// speaker extractor emitting one mask per scale, and the per-scale decoders.

#ifndef STAGEX_NETWORK_HPP_
#define STAGEX_NETWORK_HPP_

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stagex/autograd.hpp"
#include "stagex/model_config.hpp"
#include "stagex/signal.hpp"

namespace stagex {

// Ordered, named collection of learnable tensors. Names are dotted paths
// ("speech_encoder.w1", "stage2.extractor.stack0.block1.dconv", ...) and are
// the keys of the checkpoint format.
class ParameterSet {
 public:
  ag::Var Add(const std::string &name, ag::Matrix init);
  const ag::Var &Get(const std::string &name) const;
  bool Contains(const std::string &name) const;
  const std::vector<std::pair<std::string, ag::Var>> &items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t ScalarCount() const;
  void ZeroGrad();

 private:
  std::vector<std::pair<std::string, ag::Var>> items_;
};

// Weight initialisation stream. Initial values are rounded to float32 so that
// freshly built models survive a checkpoint round-trip bit for bit.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  ag::Matrix Normal(long rows, long cols, double stddev);
  static ag::Matrix Constant(long rows, long cols, double value);

 private:
  std::mt19937_64 rng_;
};

struct MultiScaleEncoding {
  std::array<ag::Var, 3> features;  // each encoder_channels x frame_count
  int frame_stride = 0;
  long frame_count = 0;
};

struct SpeakerEmbedding {
  ag::Var vector;  // embed_dim x 1
};

struct FrameEmbedding {
  ag::Var features;  // 3 * encoder_channels x frame_count
  long frame_count() const { return features.cols(); }
};

struct MaskSet {
  std::array<ag::Var, 3> masks;  // each encoder_channels x frame_count, >= 0
};

struct SpeakerOutput {
  SpeakerEmbedding embedding;
  ag::Var logits;  // num_speakers x 1
};

ag::Var ToVar(const Waveform &wave);
Waveform ToWaveform(const ag::Var &signal, int sample_rate = kSampleRate);

class SpeechEncoder {
 public:
  SpeechEncoder(const ModelConfig &config, ParameterSet &params, Initializer &init);

  // Three bias-free ReLU convolutions with a common stride; longer filters
  // read zeros past the end so every scale yields the same frame count.
  MultiScaleEncoding Encode(const ag::Var &wave) const;
  MultiScaleEncoding Encode(const Waveform &wave) const { return Encode(ToVar(wave)); }

  const std::array<ag::Var, 3> &weights() const { return weights_; }

 private:
  std::array<int, 3> lengths_;
  int stride_;
  std::array<ag::Var, 3> weights_;
};

class SpeakerEncoder {
 public:
  SpeakerEncoder(const ModelConfig &config, ParameterSet &params, Initializer &init);

  SpeakerOutput Encode(const MultiScaleEncoding &enc) const;

 private:
  struct ResBlock {
    ag::Var conv1, norm1_g, norm1_b, act1;
    ag::Var conv2, norm2_g, norm2_b, act2;
    ag::Var skip;  // undefined when widths match
  };
  ag::Var in_norm_g_, in_norm_b_, in_conv_, in_bias_;
  std::vector<ResBlock> blocks_;
  ag::Var proj_, proj_bias_, cls_, cls_bias_;
};

class Extractor {
 public:
  // `accepts_frame` allocates the projection for a frame-level reference.
  Extractor(const ModelConfig &config, const std::string &prefix, bool accepts_frame,
            ParameterSet &params, Initializer &init);

  // frame == nullptr means no frame-level reference; this is numerically the
  // same as passing an all-zero one.
  MaskSet Extract(const MultiScaleEncoding &mix, const SpeakerEmbedding &utt,
                  const FrameEmbedding *frame) const;

  bool accepts_frame() const { return frame_proj_.defined(); }

 private:
  struct TcnBlock {
    ag::Var conv_in, bias_in, act1, norm1_g, norm1_b;
    ag::Var dconv, act2, norm2_g, norm2_b;
    ag::Var conv_out, bias_out;
    int dilation = 1;
  };
  ag::Var in_norm_g_, in_norm_b_, mix_proj_, frame_proj_, proj_bias_;
  std::vector<TcnBlock> blocks_;
  int blocks_per_stack_;
  std::array<ag::Var, 3> mask_w_, mask_b_;
};

class Decoder {
 public:
  Decoder(const ModelConfig &config, const std::string &prefix, ParameterSet &params,
          Initializer &init);

  // Masks the mixture encoding per scale and overlap-adds it back to
  // `original_length` samples.
  std::array<ag::Var, 3> Decode(const MultiScaleEncoding &mix, const MaskSet &masks,
                                long original_length) const;

  const std::array<ag::Var, 3> &weights() const { return weights_; }

 private:
  int stride_;
  std::array<ag::Var, 3> weights_;
};

}  // namespace stagex

#endif  // STAGEX_NETWORK_HPP_
