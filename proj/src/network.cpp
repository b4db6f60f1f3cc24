// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/network.hpp"

#include <cmath>
#include <string>

#include "stagex/error.hpp"

namespace stagex {

namespace {

constexpr double kPReluInit = 0.25;
constexpr int kResPool = 3;

std::string Idx(const char *prefix, std::size_t i) {
  return prefix + std::to_string(i);
}

ag::Var Pointwise(const ag::Var &x, const ag::Var &w, const ag::Var &b) {
  return ag::AddBias(ag::MatMul(w, x), b);
}

}  // namespace

// ---------------------------------------------------------------------------

ag::Var ParameterSet::Add(const std::string &name, ag::Matrix init) {
  if (Contains(name)) throw ArgumentError("duplicate parameter name " + name);
  ag::Var v = ag::Parameter(std::move(init));
  items_.emplace_back(name, v);
  return v;
}

const ag::Var &ParameterSet::Get(const std::string &name) const {
  for (const auto &[n, v] : items_) {
    if (n == name) return v;
  }
  throw ArgumentError("unknown parameter " + name);
}

bool ParameterSet::Contains(const std::string &name) const {
  for (const auto &item : items_) {
    if (item.first == name) return true;
  }
  return false;
}

std::size_t ParameterSet::ScalarCount() const {
  std::size_t n = 0;
  for (const auto &item : items_) n += static_cast<std::size_t>(item.second.value().size());
  return n;
}

void ParameterSet::ZeroGrad() {
  for (auto &item : items_) item.second.ZeroGrad();
}

ag::Matrix Initializer::Normal(long rows, long cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  ag::Matrix m(rows, cols);
  for (long i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(dist(rng_)));
  }
  return m;
}

ag::Matrix Initializer::Constant(long rows, long cols, double value) {
  return ag::Matrix::Constant(rows, cols, static_cast<double>(static_cast<float>(value)));
}

ag::Var ToVar(const Waveform &wave) {
  ag::Matrix m(1, static_cast<long>(wave.size()));
  std::copy(wave.samples.begin(), wave.samples.end(), m.data());
  return ag::Constant(std::move(m));
}

Waveform ToWaveform(const ag::Var &signal, int sample_rate) {
  if (signal.rows() != 1) throw ArgumentError("to_waveform: expected a 1 x len signal");
  const ag::Matrix &m = signal.value();
  return Waveform(std::vector<double>(m.data(), m.data() + m.size()), sample_rate);
}

// ---------------------------------------------------------------------------

SpeechEncoder::SpeechEncoder(const ModelConfig &config, ParameterSet &params,
                             Initializer &init)
    : lengths_(config.filter_lengths), stride_(config.stride()) {
  for (int i = 0; i < 3; ++i) {
    weights_[i] = params.Add(Idx("speech_encoder.w", i + 1),
                             init.Normal(config.encoder_channels, lengths_[i],
                                         1.0 / std::sqrt(lengths_[i])));
  }
}

MultiScaleEncoding SpeechEncoder::Encode(const ag::Var &wave) const {
  if (wave.rows() != 1) throw ArgumentError("speech_encode: expected a 1 x len signal");
  const long len = wave.cols();
  if (len < lengths_[2]) {
    throw ArgumentError("speech_encode: input of " + std::to_string(len) +
                        " samples is shorter than the longest filter (" +
                        std::to_string(lengths_[2]) + ")");
  }
  MultiScaleEncoding enc;
  enc.frame_stride = stride_;
  enc.frame_count = (len - lengths_[0]) / stride_ + 1;
  for (int i = 0; i < 3; ++i) {
    enc.features[i] = ag::Relu(ag::FrameConv(wave, weights_[i], stride_, enc.frame_count));
  }
  return enc;
}

// ---------------------------------------------------------------------------

SpeakerEncoder::SpeakerEncoder(const ModelConfig &config, ParameterSet &params,
                               Initializer &init) {
  const long in_ch = 3L * config.encoder_channels;
  const long first = config.resnet_blocks.front();
  in_norm_g_ = params.Add("speaker_encoder.in_norm.gamma", init.Constant(in_ch, 1, 1.0));
  in_norm_b_ = params.Add("speaker_encoder.in_norm.beta", init.Constant(in_ch, 1, 0.0));
  in_conv_ = params.Add("speaker_encoder.in_conv.weight",
                        init.Normal(first, in_ch, 1.0 / std::sqrt(in_ch)));
  in_bias_ = params.Add("speaker_encoder.in_conv.bias", init.Constant(first, 1, 0.0));

  long width_in = first;
  for (std::size_t b = 0; b < config.resnet_blocks.size(); ++b) {
    const long w = config.resnet_blocks[b];
    const std::string p = Idx("speaker_encoder.res", b) + ".";
    ResBlock blk;
    blk.conv1 = params.Add(p + "conv1", init.Normal(w, width_in, 1.0 / std::sqrt(width_in)));
    blk.norm1_g = params.Add(p + "norm1.gamma", init.Constant(w, 1, 1.0));
    blk.norm1_b = params.Add(p + "norm1.beta", init.Constant(w, 1, 0.0));
    blk.act1 = params.Add(p + "act1", init.Constant(1, 1, kPReluInit));
    blk.conv2 = params.Add(p + "conv2", init.Normal(w, w, 1.0 / std::sqrt(w)));
    blk.norm2_g = params.Add(p + "norm2.gamma", init.Constant(w, 1, 1.0));
    blk.norm2_b = params.Add(p + "norm2.beta", init.Constant(w, 1, 0.0));
    blk.act2 = params.Add(p + "act2", init.Constant(1, 1, kPReluInit));
    if (w != width_in) {
      blk.skip = params.Add(p + "skip", init.Normal(w, width_in, 1.0 / std::sqrt(width_in)));
    }
    blocks_.push_back(blk);
    width_in = w;
  }
  proj_ = params.Add("speaker_encoder.proj.weight",
                     init.Normal(config.embed_dim, width_in, 1.0 / std::sqrt(width_in)));
  proj_bias_ = params.Add("speaker_encoder.proj.bias", init.Constant(config.embed_dim, 1, 0.0));
  cls_ = params.Add("speaker_encoder.classifier.weight",
                    init.Normal(config.num_speakers, config.embed_dim,
                                1.0 / std::sqrt(config.embed_dim)));
  cls_bias_ = params.Add("speaker_encoder.classifier.bias",
                         init.Constant(config.num_speakers, 1, 0.0));
}

SpeakerOutput SpeakerEncoder::Encode(const MultiScaleEncoding &enc) const {
  ag::Var x = ag::ConcatRows(enc.features);
  x = ag::GlobalLayerNorm(x, in_norm_g_, in_norm_b_);
  x = Pointwise(x, in_conv_, in_bias_);
  for (const auto &blk : blocks_) {
    ag::Var y = ag::MatMul(blk.conv1, x);
    y = ag::PRelu(ag::GlobalLayerNorm(y, blk.norm1_g, blk.norm1_b), blk.act1);
    y = ag::GlobalLayerNorm(ag::MatMul(blk.conv2, y), blk.norm2_g, blk.norm2_b);
    ag::Var skip = blk.skip.defined() ? ag::MatMul(blk.skip, x) : x;
    x = ag::AvgPoolCols(ag::PRelu(ag::Add(y, skip), blk.act2), kResPool);
  }
  SpeakerOutput out;
  out.embedding.vector = Pointwise(ag::MeanCols(x), proj_, proj_bias_);
  out.logits = Pointwise(out.embedding.vector, cls_, cls_bias_);
  return out;
}

// ---------------------------------------------------------------------------

Extractor::Extractor(const ModelConfig &config, const std::string &prefix,
                     bool accepts_frame, ParameterSet &params, Initializer &init)
    : blocks_per_stack_(config.tcn_blocks_per_stack) {
  const long feat = 3L * config.encoder_channels;
  const long bott = config.bottleneck_channels;
  const long hid = config.tcn_channels;
  const std::string p = prefix + ".";
  in_norm_g_ = params.Add(p + "in_norm.gamma", init.Constant(feat, 1, 1.0));
  in_norm_b_ = params.Add(p + "in_norm.beta", init.Constant(feat, 1, 0.0));
  mix_proj_ = params.Add(p + "mix_proj", init.Normal(bott, feat, 1.0 / std::sqrt(feat)));
  if (accepts_frame) {
    frame_proj_ = params.Add(p + "frame_proj", init.Normal(bott, feat, 1.0 / std::sqrt(feat)));
  }
  proj_bias_ = params.Add(p + "proj_bias", init.Constant(bott, 1, 0.0));

  for (int r = 0; r < config.tcn_stacks; ++r) {
    for (int b = 0; b < config.tcn_blocks_per_stack; ++b) {
      const long in_ch = b == 0 ? bott + config.embed_dim : bott;
      const std::string q = p + Idx("stack", r) + Idx(".block", b) + ".";
      TcnBlock blk;
      blk.dilation = 1 << b;
      blk.conv_in = params.Add(q + "conv_in", init.Normal(hid, in_ch, 1.0 / std::sqrt(in_ch)));
      blk.bias_in = params.Add(q + "bias_in", init.Constant(hid, 1, 0.0));
      blk.act1 = params.Add(q + "act1", init.Constant(1, 1, kPReluInit));
      blk.norm1_g = params.Add(q + "norm1.gamma", init.Constant(hid, 1, 1.0));
      blk.norm1_b = params.Add(q + "norm1.beta", init.Constant(hid, 1, 0.0));
      blk.dconv = params.Add(q + "dconv", init.Normal(hid, config.tcn_kernel,
                                                      1.0 / std::sqrt(config.tcn_kernel)));
      blk.act2 = params.Add(q + "act2", init.Constant(1, 1, kPReluInit));
      blk.norm2_g = params.Add(q + "norm2.gamma", init.Constant(hid, 1, 1.0));
      blk.norm2_b = params.Add(q + "norm2.beta", init.Constant(hid, 1, 0.0));
      blk.conv_out = params.Add(q + "conv_out", init.Normal(bott, hid, 1.0 / std::sqrt(hid)));
      blk.bias_out = params.Add(q + "bias_out", init.Constant(bott, 1, 0.0));
      blocks_.push_back(blk);
    }
  }
  for (int i = 0; i < 3; ++i) {
    mask_w_[i] = params.Add(p + Idx("mask", i + 1) + ".weight",
                            init.Normal(config.encoder_channels, bott, 1.0 / std::sqrt(bott)));
    mask_b_[i] = params.Add(p + Idx("mask", i + 1) + ".bias",
                            init.Constant(config.encoder_channels, 1, 0.0));
  }
}

MaskSet Extractor::Extract(const MultiScaleEncoding &mix, const SpeakerEmbedding &utt,
                           const FrameEmbedding *frame) const {
  const long frames = mix.frame_count;
  ag::Var mixed = ag::GlobalLayerNorm(ag::ConcatRows(mix.features), in_norm_g_, in_norm_b_);
  ag::Var h = ag::MatMul(mix_proj_, mixed);
  if (frame != nullptr) {
    if (!accepts_frame()) {
      throw ArgumentError("extract_masks: this extractor takes no frame-level reference");
    }
    if (frame->frame_count() != frames) {
      throw ArgumentError("extract_masks: frame embedding has " +
                          std::to_string(frame->frame_count()) +
                          " frames but the mixture encoding has " +
                          std::to_string(frames));
    }
    // Affine-free gLN keeps an all-zero reference at zero.
    const long rows = frame->features.rows();
    ag::Var normed = ag::GlobalLayerNorm(frame->features, ag::Constant(ag::Matrix::Ones(rows, 1)),
                                         ag::Constant(ag::Matrix::Zero(rows, 1)));
    h = ag::Add(h, ag::MatMul(frame_proj_, normed));
  }
  h = ag::AddBias(h, proj_bias_);

  ag::Var utt_rep;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const TcnBlock &blk = blocks_[i];
    ag::Var in = h;
    if (i % blocks_per_stack_ == 0) {
      if (!utt_rep.defined()) utt_rep = ag::RepeatCols(utt.vector, frames);
      const ag::Var parts[] = {h, utt_rep};
      in = ag::ConcatRows(parts);
    }
    ag::Var y = ag::PRelu(Pointwise(in, blk.conv_in, blk.bias_in), blk.act1);
    y = ag::GlobalLayerNorm(y, blk.norm1_g, blk.norm1_b);
    y = ag::PRelu(ag::DepthwiseConv(y, blk.dconv, blk.dilation), blk.act2);
    y = ag::GlobalLayerNorm(y, blk.norm2_g, blk.norm2_b);
    h = ag::Add(h, Pointwise(y, blk.conv_out, blk.bias_out));
  }

  MaskSet out;
  for (int i = 0; i < 3; ++i) out.masks[i] = ag::Relu(Pointwise(h, mask_w_[i], mask_b_[i]));
  return out;
}

// ---------------------------------------------------------------------------

Decoder::Decoder(const ModelConfig &config, const std::string &prefix,
                 ParameterSet &params, Initializer &init)
    : stride_(config.stride()) {
  const long n = config.encoder_channels;
  for (int i = 0; i < 3; ++i) {
    weights_[i] = params.Add(prefix + Idx(".w", i + 1),
                             init.Normal(config.filter_lengths[i], n, 1.0 / std::sqrt(n)));
  }
}

std::array<ag::Var, 3> Decoder::Decode(const MultiScaleEncoding &mix, const MaskSet &masks,
                                       long original_length) const {
  std::array<ag::Var, 3> out;
  for (int i = 0; i < 3; ++i) {
    const ag::Var &m = masks.masks[i];
    const ag::Var &f = mix.features[i];
    if (m.rows() != f.rows() || m.cols() != f.cols()) {
      throw ArgumentError("decode: mask " + std::to_string(i + 1) + " is " +
                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                          " but the encoding is " + std::to_string(f.rows()) + "x" +
                          std::to_string(f.cols()));
    }
    out[i] = ag::OverlapAdd(ag::Mul(m, f), weights_[i], stride_, original_length);
  }
  return out;
}

}  // namespace stagex
