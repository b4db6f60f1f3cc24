// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/multistage.hpp"

#include <cmath>
#include <string>

#include "stagex/error.hpp"

namespace stagex {

namespace {

struct SharedInputs {
  const ag::Var &mixture;
  const MultiScaleEncoding &mix_enc;
  const ag::Var &reference;
  const SpeakerOutput &reference_speaker;  // speaker encoder on the reference alone
};

StageOutput RunStageWith(int k, const SharedInputs &in, const StageOutput *prev,
                         const Model &model) {
  if (k < 1 || k > model.num_stages()) {
    throw ArgumentError("run_stage: stage " + std::to_string(k) + " outside [1, " +
                        std::to_string(model.num_stages()) + "]");
  }
  if (k == 1 && prev != nullptr) {
    throw ArgumentError("run_stage: stage 1 takes no previous estimate");
  }
  if (k >= 2 && prev == nullptr) {
    throw ArgumentError("run_stage: stage " + std::to_string(k) +
                        " requires the previous stage output");
  }
  const ModelConfig &cfg = model.config();
  StageOutput out;
  const FrameEmbedding *frame = nullptr;
  if (k == 1) {
    out.utt_embedding = in.reference_speaker.embedding;
    out.speaker_logits = in.reference_speaker.logits;
  } else {
    RefinedReferences refined = RefineReferences(model, in.reference, prev->fused);
    const SpeakerOutput &utt = cfg.use_utt ? refined.utterance : in.reference_speaker;
    out.utt_embedding = utt.embedding;
    out.speaker_logits = utt.logits;
    if (cfg.use_frame) {
      out.frame_embedding = std::move(refined.frame);
      frame = &*out.frame_embedding;
    }
  }

  const Model::Stage &stage = model.stage(k);
  MaskSet masks = stage.extractor.Extract(in.mix_enc, out.utt_embedding, frame);
  out.per_scale_estimates = stage.decoder.Decode(in.mix_enc, masks, in.mixture.cols());
  const auto &e = out.per_scale_estimates;
  const auto &w = stage.fusion;
  out.fused = ag::Fuse3(e[0], e[1], e[2], w[0], w[1], w[2]);
  return out;
}

}  // namespace

void Model::SetReferenceMode(bool use_utt, bool use_frame) {
  if (use_frame && (stages_.size() < 2 || !stages_[1].extractor.accepts_frame())) {
    throw ConfigError("use_frame requires a model trained with the frame-level reference");
  }
  config_.use_utt = use_utt;
  config_.use_frame = use_frame;
}

FusionWeights Model::Stage::fusion_weights() const {
  return {fusion[0].scalar(), fusion[1].scalar(), fusion[2].scalar()};
}

Model::Model(const ModelConfig &config, std::uint64_t seed) : config_(config) {
  config_.Validate();
  Initializer init(seed);
  speech_encoder_ = std::make_unique<SpeechEncoder>(config_, params_, init);
  speaker_encoder_ = std::make_unique<SpeakerEncoder>(config_, params_, init);
  stages_.reserve(static_cast<std::size_t>(config_.num_stages));
  for (int k = 1; k <= config_.num_stages; ++k) {
    const std::string p = "stage" + std::to_string(k);
    const bool frame = k >= 2 && config_.use_frame;
    Extractor ext(config_, p + ".extractor", frame, params_, init);
    Decoder dec(config_, p + ".decoder", params_, init);
    std::array<ag::Var, 3> fusion;
    for (int i = 0; i < 3; ++i) {
      fusion[i] = params_.Add(p + ".fusion.w" + std::to_string(i + 1),
                              Initializer::Constant(1, 1, config_.fusion_init[i]));
    }
    stages_.push_back(Stage{std::move(ext), std::move(dec), fusion});
  }
}

std::vector<ag::Matrix> Model::Snapshot() const {
  std::vector<ag::Matrix> out;
  out.reserve(params_.size());
  for (const auto &item : params_.items()) out.push_back(item.second.value());
  return out;
}

void Model::Restore(const std::vector<ag::Matrix> &values) {
  if (values.size() != params_.size()) throw ArgumentError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    ag::Var v = params_.items()[i].second;
    if (v.rows() != values[i].rows() || v.cols() != values[i].cols()) {
      throw ArgumentError("restore: shape mismatch for " + params_.items()[i].first);
    }
    v.mutable_value() = values[i];
  }
}

RefinedReferences RefineReferences(const Model &model, const ag::Var &reference,
                                   const ag::Var &prev_estimate) {
  RefinedReferences out;
  // The estimate's gain is arbitrary under a scale-invariant loss; bring it to
  // the reference level before the two are pooled together.
  const double ref_rms = std::sqrt(reference.value().squaredNorm() /
                                   static_cast<double>(reference.value().size()));
  ag::Var leveled = ag::ScaleToRms(prev_estimate, ref_rms);
  ag::Var joined = ag::ConcatCols(reference, leveled);
  out.utterance = model.speaker_encoder().Encode(model.speech_encoder().Encode(joined));
  MultiScaleEncoding prev_enc = model.speech_encoder().Encode(leveled);
  out.frame.features = ag::ConcatRows(prev_enc.features);
  return out;
}

StageOutput RunStage(int k, const ag::Var &mixture, const ag::Var &reference,
                     const StageOutput *prev, const Model &model) {
  MultiScaleEncoding mix_enc = model.speech_encoder().Encode(mixture);
  SpeakerOutput ref = model.speaker_encoder().Encode(model.speech_encoder().Encode(reference));
  return RunStageWith(k, {mixture, mix_enc, reference, ref}, prev, model);
}

PipelineOutput ForwardPipeline(const Model &model, const ag::Var &mixture,
                               const ag::Var &reference) {
  MultiScaleEncoding mix_enc = model.speech_encoder().Encode(mixture);
  SpeakerOutput ref = model.speaker_encoder().Encode(model.speech_encoder().Encode(reference));
  SharedInputs in{mixture, mix_enc, reference, ref};
  PipelineOutput out;
  out.stages.reserve(static_cast<std::size_t>(model.num_stages()));
  for (int k = 1; k <= model.num_stages(); ++k) {
    const StageOutput *prev = k == 1 ? nullptr : &out.stages.back();
    out.stages.push_back(RunStageWith(k, in, prev, model));
  }
  return out;
}

PipelineOutput ForwardPipeline(const Model &model, const Waveform &mixture,
                               const Waveform &reference) {
  return ForwardPipeline(model, ToVar(mixture), ToVar(reference));
}

}  // namespace stagex
