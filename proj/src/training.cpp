// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include "stagex/checkpoint.hpp"
#include "stagex/error.hpp"
#include "stagex/seed.hpp"

namespace stagex {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kShuffleStream = 0x5ff1e;

template <typename T>
T Field(const nlohmann::json &j, const char *key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &) {
    throw ConfigError(std::string("train config: field '") + key + "' has the wrong type");
  }
}

nlohmann::json FiniteOrNull(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

double NumberOr(const nlohmann::json &j, const char *key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

// A training crop of the mixture/target pair; the reference stays whole.
MixtureExample Crop(const MixtureExample &ex, std::size_t seg, std::mt19937_64 &rng) {
  const std::size_t len = ex.mixture.size();
  if (seg == 0 || len <= seg) return ex;
  const double total = Energy(ex.target.view()) / static_cast<double>(len);
  std::uniform_int_distribution<std::size_t> pick(0, len - seg);
  std::size_t best = 0;
  double best_power = -1.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    const std::size_t off = pick(rng);
    const double p = Energy(ex.target.view().subspan(off, seg)) / static_cast<double>(seg);
    if (p > best_power) {
      best_power = p;
      best = off;
    }
    if (p >= 0.25 * total) break;
  }
  MixtureExample out;
  auto slice = [&](const Waveform &w) {
    return Waveform(std::vector<double>(w.samples.begin() + static_cast<long>(best),
                                        w.samples.begin() + static_cast<long>(best + seg)),
                    w.sample_rate);
  };
  out.mixture = slice(ex.mixture);
  out.target = slice(ex.target);
  out.reference = ex.reference;
  out.speaker_id = ex.speaker_id;
  out.condition = ex.condition;
  out.snr_db = ex.snr_db;
  return out;
}

double ExampleLoss(const Model &model, const MixtureExample &ex, double gamma, bool backward) {
  PipelineOutput out = ForwardPipeline(model, ex.mixture, ex.reference);
  ag::Var loss = TotalLoss(out, ex.target.view(), ex.speaker_id, gamma);
  const double value = loss.scalar();
  if (backward && std::isfinite(value)) ag::Backward(loss);
  return value;
}

void AppendLine(const fs::path &path, const std::string &line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError(path.string(), "cannot append to " + path.string());
  out << line << '\n';
}

}  // namespace

void TrainConfig::Validate() const {
  if (max_epochs < 1) throw ConfigError("train config: max_epochs must be >= 1");
  if (!(lr_init > 0.0)) throw ConfigError("train config: lr_init must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw ConfigError("train config: lr_decay_factor must be in (0, 1]");
  }
  if (lr_patience_epochs < 1) throw ConfigError("train config: lr_patience_epochs must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("train config: early_stop_patience must be >= 1");
  if (!(segment_seconds >= 0.0)) throw ConfigError("train config: segment_seconds must be >= 0");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (!(multitask_gamma >= 0.0)) throw ConfigError("train config: multitask_gamma must be >= 0");
  if (!std::isfinite(grad_clip)) throw ConfigError("train config: grad_clip must be finite");
}

nlohmann::ordered_json ToJson(const TrainConfig &c) {
  nlohmann::ordered_json j;
  j["max_epochs"] = c.max_epochs;
  j["lr_init"] = c.lr_init;
  j["lr_decay_factor"] = c.lr_decay_factor;
  j["lr_patience_epochs"] = c.lr_patience_epochs;
  j["early_stop_patience"] = c.early_stop_patience;
  j["segment_seconds"] = c.segment_seconds;
  j["batch_size"] = c.batch_size;
  j["multitask_gamma"] = c.multitask_gamma;
  j["seed"] = c.seed;
  j["grad_clip"] = c.grad_clip;
  return j;
}

TrainConfig TrainConfigFromJson(const nlohmann::json &j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  const nlohmann::ordered_json known = ToJson(c);
  for (const auto &[key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("train config: unknown key '" + key + "'");
  }
  c.max_epochs = Field(j, "max_epochs", c.max_epochs);
  c.lr_init = Field(j, "lr_init", c.lr_init);
  c.lr_decay_factor = Field(j, "lr_decay_factor", c.lr_decay_factor);
  c.lr_patience_epochs = Field(j, "lr_patience_epochs", c.lr_patience_epochs);
  c.early_stop_patience = Field(j, "early_stop_patience", c.early_stop_patience);
  c.segment_seconds = Field(j, "segment_seconds", c.segment_seconds);
  c.batch_size = Field(j, "batch_size", c.batch_size);
  c.multitask_gamma = Field(j, "multitask_gamma", c.multitask_gamma);
  c.seed = Field(j, "seed", c.seed);
  c.grad_clip = Field(j, "grad_clip", c.grad_clip);
  return c;
}

ag::Var TotalLoss(const PipelineOutput &out, std::span<const double> target, int speaker_label,
                  double gamma) {
  if (out.stages.empty()) throw ArgumentError("total_loss: pipeline output has no stages");
  const double inv_k = 1.0 / static_cast<double>(out.stages.size());
  std::vector<ag::Var> terms;
  for (const StageOutput &st : out.stages) {
    terms.push_back(ag::Scale(ag::SiSdrLoss(st.fused, target), inv_k));
    if (gamma != 0.0) {
      terms.push_back(ag::Scale(ag::CrossEntropy(st.speaker_logits, speaker_label), gamma * inv_k));
    }
  }
  ag::Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ag::Add(total, terms[i]);
  return total;
}

nlohmann::ordered_json ToJson(const EpochRecord &r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = FiniteOrNull(r.train_loss);
  j["dev_sisdri"] = FiniteOrNull(r.dev_sisdri);
  j["lr"] = r.lr;
  nlohmann::ordered_json fusion = nlohmann::ordered_json::array();
  for (const FusionWeights &w : r.fusion) fusion.push_back({w.w1, w.w2, w.w3});
  j["fusion"] = fusion;
  j["improved"] = r.improved;
  return j;
}

namespace {

EpochRecord EpochRecordFromJson(const nlohmann::json &j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.train_loss = NumberOr(j, "train_loss", std::numeric_limits<double>::quiet_NaN());
  r.dev_sisdri = NumberOr(j, "dev_sisdri", std::numeric_limits<double>::quiet_NaN());
  r.lr = j.at("lr").get<double>();
  for (const auto &w : j.at("fusion")) {
    r.fusion.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()});
  }
  r.improved = j.at("improved").get<bool>();
  return r;
}

}  // namespace

void SaveTrainState(const TrainState &state, const Model &model, const fs::path &path) {
  Container c;
  c.meta["format"] = "stagex-train-state";
  c.meta["model_config"] = ToJson(model.config());
  c.meta["epoch"] = state.epoch;
  c.meta["lr"] = state.lr;
  c.meta["best_val"] = FiniteOrNull(state.best_val);
  c.meta["best_epoch"] = state.best_epoch;
  c.meta["epochs_since_best"] = state.epochs_since_best;
  c.meta["rng_seed"] = state.rng_seed;
  c.meta["step"] = state.step;
  nlohmann::ordered_json history = nlohmann::ordered_json::array();
  for (const EpochRecord &r : state.history) history.push_back(ToJson(r));
  c.meta["history"] = history;

  const auto &items = model.parameters().items();
  auto add_group = [&](const char *prefix, const std::vector<ag::Matrix> &values) {
    if (values.empty()) return;
    if (values.size() != items.size()) {
      throw ArgumentError(std::string("train state: ") + prefix + " has the wrong parameter count");
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      c.tensors.push_back({std::string(prefix) + "/" + items[i].first, DType::kFloat64, values[i]});
    }
  };
  add_group("param", state.params.empty() ? model.Snapshot() : state.params);
  add_group("best", state.best_params);
  add_group("adam_m", state.adam_m);
  add_group("adam_v", state.adam_v);
  WriteContainer(c, path);
}

TrainState LoadTrainState(const Model &model, const fs::path &path) {
  Container c = ReadContainer(path);
  if (c.meta.value("format", "") != "stagex-train-state") {
    throw CorruptArtifactError("format", "not a training state file: " + path.string());
  }
  TrainState s;
  try {
    if (ToJson(ModelConfigFromJson(c.meta.at("model_config"))).dump() != ToJson(model.config()).dump()) {
      throw ConfigError("training state was written for a different model config");
    }
    s.epoch = c.meta.at("epoch").get<int>();
    s.lr = c.meta.at("lr").get<double>();
    s.best_val = NumberOr(c.meta, "best_val", -std::numeric_limits<double>::infinity());
    s.best_epoch = c.meta.at("best_epoch").get<int>();
    s.epochs_since_best = c.meta.at("epochs_since_best").get<int>();
    s.rng_seed = c.meta.at("rng_seed").get<std::uint64_t>();
    s.step = c.meta.at("step").get<std::uint64_t>();
    for (const auto &r : c.meta.at("history")) s.history.push_back(EpochRecordFromJson(r));
  } catch (const nlohmann::json::exception &e) {
    throw CorruptArtifactError("meta", std::string("training state metadata invalid: ") + e.what());
  }

  const auto &items = model.parameters().items();
  auto read_group = [&](const std::string &prefix, bool required) {
    std::vector<ag::Matrix> out;
    const std::string probe = prefix + "/" + items.front().first;
    bool present = std::any_of(c.tensors.begin(), c.tensors.end(),
                               [&](const TensorRecord &t) { return t.name == probe; });
    if (!present && !required) return out;
    for (const auto &[name, var] : items) {
      const TensorRecord &t = c.Get(prefix + "/" + name);
      if (t.value.rows() != var.rows() || t.value.cols() != var.cols()) {
        throw CorruptArtifactError(t.name, "tensor '" + t.name + "' has the wrong shape");
      }
      out.push_back(t.value);
    }
    return out;
  };
  s.params = read_group("param", true);
  s.best_params = read_group("best", false);
  s.adam_m = read_group("adam_m", false);
  s.adam_v = read_group("adam_v", false);
  return s;
}

ScheduleDecision ApplySchedule(TrainState &state, const TrainConfig &config, double val_metric) {
  ScheduleDecision d;
  if (std::isfinite(val_metric) && val_metric > state.best_val) {
    state.best_val = val_metric;
    state.best_epoch = state.epoch;
    state.epochs_since_best = 0;
    d.improved = true;
  } else {
    ++state.epochs_since_best;
    if (state.epochs_since_best % config.lr_patience_epochs == 0) {
      state.lr *= config.lr_decay_factor;
    }
  }
  d.stop = state.epochs_since_best >= config.early_stop_patience;
  return d;
}

double Adam::Step(Model &model, TrainState &state, double lr, double grad_scale,
                  double clip_norm) const {
  const auto &items = model.parameters().items();
  if (state.adam_m.size() != items.size()) {
    state.adam_m.clear();
    state.adam_v.clear();
    for (const auto &[name, var] : items) {
      state.adam_m.push_back(ag::Matrix::Zero(var.rows(), var.cols()));
      state.adam_v.push_back(ag::Matrix::Zero(var.rows(), var.cols()));
    }
  }
  std::vector<ag::Matrix> grads;
  grads.reserve(items.size());
  double sq = 0.0;
  for (const auto &[name, var] : items) {
    grads.push_back(var.grad() * grad_scale);
    sq += grads.back().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  const double clip = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < items.size(); ++i) {
    ag::Matrix g = grads[i] * clip;
    ag::Matrix &m = state.adam_m[i];
    ag::Matrix &v = state.adam_v[i];
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    ag::Var p = items[i].second;
    ag::Matrix update =
        (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    p.mutable_value() = (p.value() - lr * update).cast<float>().cast<double>();
  }
  model.parameters().ZeroGrad();
  return norm;
}

double MeanFinalSiSdri(const Model &model, std::span<const MixtureExample> examples) {
  if (examples.empty()) return std::numeric_limits<double>::quiet_NaN();
  ag::NoGradGuard guard;
  double sum = 0.0;
  for (const MixtureExample &ex : examples) {
    PipelineOutput out = ForwardPipeline(model, ex.mixture, ex.reference);
    Waveform est = ToWaveform(out.final_stage().fused);
    sum += ComputeImprovement(est, ex.mixture, ex.target).si_sdri;
  }
  return sum / static_cast<double>(examples.size());
}

FitResult Fit(Model &model, std::span<const MixtureExample> train,
              std::span<const MixtureExample> dev, const TrainConfig &config, FitOptions options) {
  config.Validate();
  if (train.empty()) throw ArgumentError("fit: no training examples");
  if (!options.validator && dev.empty()) throw ArgumentError("fit: no dev examples");

  TrainState state;
  if (options.resume) {
    state = *options.resume;
    if (!state.params.empty()) model.Restore(state.params);
  } else {
    state.lr = config.lr_init;
    state.rng_seed = config.seed;
  }
  if (options.output_dir) fs::create_directories(*options.output_dir);

  const Adam adam;
  const auto seg = static_cast<std::size_t>(std::llround(config.segment_seconds * kSampleRate));
  FitResult result;
  bool stop = !state.history.empty() &&
              state.epochs_since_best >= config.early_stop_patience;

  for (int epoch = state.epoch + 1; epoch <= config.max_epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle(SeedOf(state.rng_seed, epoch, kShuffleStream));
    std::shuffle(order.begin(), order.end(), shuffle);
    if (options.max_examples_per_epoch > 0 &&
        order.size() > static_cast<std::size_t>(options.max_examples_per_epoch)) {
      order.resize(static_cast<std::size_t>(options.max_examples_per_epoch));
    }

    const double lr = state.lr;
    double loss_sum = 0.0;
    model.parameters().ZeroGrad();
    const auto bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0, batch = 0; start < order.size(); start += bs, ++batch) {
      const std::uint64_t batch_seed = SeedOf(state.rng_seed, epoch, batch);
      std::mt19937_64 rng(batch_seed);
      const std::size_t end = std::min(order.size(), start + bs);
      for (std::size_t i = start; i < end; ++i) {
        MixtureExample ex = Crop(train[order[i]], seg, rng);
        const double value = ExampleLoss(model, ex, config.multitask_gamma, true);
        if (!std::isfinite(value)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch) + " (batch seed " +
                             std::to_string(batch_seed) + ")");
        }
        loss_sum += value;
      }
      try {
        adam.Step(model, state, lr, 1.0 / static_cast<double>(end - start), config.grad_clip);
      } catch (const NumericError &) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + " (batch seed " + std::to_string(batch_seed) +
                           ")");
      }
    }

    const double val = options.validator ? options.validator(model, epoch)
                                         : MeanFinalSiSdri(model, dev);
    state.epoch = epoch;
    ScheduleDecision d = ApplySchedule(state, config, val);
    stop = d.stop;
    if (d.improved) state.best_params = model.Snapshot();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.dev_sisdri = val;
    rec.lr = lr;
    for (int k = 1; k <= model.num_stages(); ++k) rec.fusion.push_back(model.stage(k).fusion_weights());
    rec.improved = d.improved;
    state.history.push_back(rec);
    state.params = model.Snapshot();

    if (options.output_dir) {
      const fs::path dir = *options.output_dir;
      if (d.improved) {
        SaveCheckpoint(model, dir / "best.ckpt",
                       {{"epoch", epoch}, {"dev_sisdri", FiniteOrNull(val)}});
      }
      AppendLine(dir / "history.jsonl", ToJson(rec).dump());
      SaveTrainState(state, model, dir / "last.state");
    }
    if (options.log) {
      *options.log << "epoch " << epoch << " loss " << rec.train_loss << " dev_si_sdri " << val
                   << " lr " << lr << (d.improved ? " *" : "") << '\n';
      options.log->flush();
    }
    if (options.on_epoch) options.on_epoch(rec);
    if (stop) result.early_stopped = true;
  }

  if (!state.best_params.empty()) model.Restore(state.best_params);
  result.history = state.history;
  result.best_val = state.best_val;
  result.best_epoch = state.best_epoch;
  result.early_stopped = result.early_stopped || stop;
  result.final_state = std::move(state);
  return result;
}

GradCheckResult GradCheck(Model &model, const MixtureExample &example,
                          const std::vector<std::pair<std::string, long>> &entries, double h,
                          double gamma, int speaker_label) {
  MixtureExample ex = example;
  ex.speaker_id = speaker_label;
  model.parameters().ZeroGrad();
  ExampleLoss(model, ex, gamma, true);

  GradCheckResult result;
  for (const auto &[name, index] : entries) {
    ag::Var p = model.parameters().Get(name);
    if (index < 0 || index >= p.value().size()) {
      throw ArgumentError("grad_check: index " + std::to_string(index) + " out of range for " + name);
    }
    GradCheckEntry e;
    e.name = name;
    e.index = index;
    e.analytic = p.grad().data()[index];
    const double saved = p.value().data()[index];
    double plus, minus;
    {
      ag::NoGradGuard guard;
      p.mutable_value().data()[index] = saved + h;
      plus = ExampleLoss(model, ex, gamma, false);
      p.mutable_value().data()[index] = saved - h;
      minus = ExampleLoss(model, ex, gamma, false);
      p.mutable_value().data()[index] = saved;
    }
    e.numeric = (plus - minus) / (2.0 * h);
    e.rel_error = std::abs(e.analytic - e.numeric) /
                  std::max({std::abs(e.analytic), std::abs(e.numeric), 1e-7});
    result.max_rel_error = std::max(result.max_rel_error, e.rel_error);
    result.entries.push_back(e);
  }
  model.parameters().ZeroGrad();
  return result;
}

}  // namespace stagex
