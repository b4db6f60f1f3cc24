// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// K extraction stages chained so that stage k >= 2 uses the fused estimate of
// stage k-1 twice: appended to the reference utterance for a refined
// utterance-level embedding, and encoded on its own as a frame-aligned
// reference for the extractor.
//
// Parameter sharing: one speech encoder and one speaker encoder (with its
// classifier head) serve every stage and call site; each stage owns its
// extractor, decoders and fusion weights.

#ifndef STAGEX_MULTISTAGE_HPP_
#define STAGEX_MULTISTAGE_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "stagex/network.hpp"

namespace stagex {

class Model {
 public:
  struct Stage {
    Extractor extractor;
    Decoder decoder;
    std::array<ag::Var, 3> fusion;  // w1, w2, w3 as 1x1 parameters
    FusionWeights fusion_weights() const;
  };

  Model(const ModelConfig &config, std::uint64_t seed);
  Model(const Model &) = delete;
  Model &operator=(const Model &) = delete;
  Model(Model &&) = default;
  Model &operator=(Model &&) = default;

  const ModelConfig &config() const { return config_; }
  ParameterSet &parameters() { return params_; }
  const ParameterSet &parameters() const { return params_; }
  const SpeechEncoder &speech_encoder() const { return *speech_encoder_; }
  const SpeakerEncoder &speaker_encoder() const { return *speaker_encoder_; }
  const Stage &stage(int k) const { return stages_.at(static_cast<std::size_t>(k - 1)); }
  int num_stages() const { return static_cast<int>(stages_.size()); }

  // Switches which refined references stages k >= 2 consume. Enabling the
  // frame path on a model built without it throws ConfigError.
  void SetReferenceMode(bool use_utt, bool use_frame);

  // Copies of every parameter value, in parameters() order.
  std::vector<ag::Matrix> Snapshot() const;
  void Restore(const std::vector<ag::Matrix> &values);

 private:
  ModelConfig config_;
  ParameterSet params_;
  // Heap-held so that Vars stay put when the Model is moved.
  std::unique_ptr<SpeechEncoder> speech_encoder_;
  std::unique_ptr<SpeakerEncoder> speaker_encoder_;
  std::vector<Stage> stages_;
};

struct StageOutput {
  std::array<ag::Var, 3> per_scale_estimates;
  ag::Var fused;
  ag::Var speaker_logits;
  SpeakerEmbedding utt_embedding;
  std::optional<FrameEmbedding> frame_embedding;  // absent at stage 1
};

struct PipelineOutput {
  std::vector<StageOutput> stages;
  const StageOutput &final_stage() const { return stages.back(); }
};

struct RefinedReferences {
  SpeakerOutput utterance;  // embedding + logits from [reference, previous estimate]
  FrameEmbedding frame;
};

// The previous estimate is first rescaled to the reference's RMS level.
// Utterance path: the reference followed by that estimate in time, through the
// shared speech and speaker encoders. Frame path: the estimate alone through
// the shared speech encoder, scales stacked on the channel axis.
RefinedReferences RefineReferences(const Model &model, const ag::Var &reference,
                                   const ag::Var &prev_estimate);

// Runs stage k (1-based). Stage 1 requires `prev` to be absent and uses the
// reference alone; later stages require it.
StageOutput RunStage(int k, const ag::Var &mixture, const ag::Var &reference,
                     const StageOutput *prev, const Model &model);

PipelineOutput ForwardPipeline(const Model &model, const ag::Var &mixture,
                               const ag::Var &reference);
PipelineOutput ForwardPipeline(const Model &model, const Waveform &mixture,
                               const Waveform &reference);

}  // namespace stagex

#endif  // STAGEX_MULTISTAGE_HPP_
