// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef STAGEX_TRAINING_HPP_
#define STAGEX_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stagex/dataset.hpp"
#include "stagex/multistage.hpp"

namespace stagex {

struct TrainConfig {
  int max_epochs = 100;
  double lr_init = 1e-3;
  double lr_decay_factor = 0.5;
  int lr_patience_epochs = 2;
  int early_stop_patience = 6;
  double segment_seconds = 4.0;
  int batch_size = 4;
  double multitask_gamma = 0.5;
  std::uint64_t seed = 1;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables clipping

  void Validate() const;  // ConfigError
};

nlohmann::ordered_json ToJson(const TrainConfig &config);
TrainConfig TrainConfigFromJson(const nlohmann::json &j);

// Per-stage SI-SDR losses and speaker cross-entropies, each averaged over the
// K stages: mean_k(-SI-SDR(fused_k, s)) + gamma * mean_k(CE(logits_k, label)).
ag::Var TotalLoss(const PipelineOutput &out, std::span<const double> target,
                  int speaker_label, double gamma);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_sisdri = 0.0;
  double lr = 0.0;  // rate used during this epoch
  std::vector<FusionWeights> fusion;  // per stage, after the epoch
  bool improved = false;
};

nlohmann::ordered_json ToJson(const EpochRecord &record);

// Everything needed to resume training where it stopped.
struct TrainState {
  int epoch = 0;  // epochs completed
  double lr = 1e-3;
  double best_val = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int epochs_since_best = 0;
  std::uint64_t rng_seed = 0;  // per-epoch streams derive from (rng_seed, epoch)
  std::uint64_t step = 0;      // optimizer steps taken
  std::vector<ag::Matrix> adam_m, adam_v;
  std::vector<ag::Matrix> params, best_params;
  std::vector<EpochRecord> history;
};

void SaveTrainState(const TrainState &state, const Model &model,
                    const std::filesystem::path &path);
TrainState LoadTrainState(const Model &model, const std::filesystem::path &path);

// Applies one epoch's validation result: tracks the best value, halves the
// rate after every `lr_patience_epochs` consecutive non-improving epochs and
// reports whether the improvement counter has reached `early_stop_patience`.
struct ScheduleDecision {
  bool improved = false;
  bool stop = false;
};
ScheduleDecision ApplySchedule(TrainState &state, const TrainConfig &config, double val_metric);

class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // One update from the accumulated parameter gradients scaled by
  // `grad_scale`. Updated values are rounded to float32. Returns the global
  // gradient norm before clipping.
  double Step(Model &model, TrainState &state, double lr, double grad_scale,
              double clip_norm) const;

 private:
  double beta1_, beta2_, eps_;
};

// Mean final-stage SI-SDRi over the examples, without gradients.
double MeanFinalSiSdri(const Model &model, std::span<const MixtureExample> examples);

using Validator = std::function<double(const Model &, int epoch)>;

struct FitOptions {
  // Overrides the dev-set SI-SDRi validation metric.
  Validator validator;
  // When set: best.ckpt, last.state and history.jsonl are written here.
  std::optional<std::filesystem::path> output_dir;
  // Continue from a saved state instead of starting fresh.
  std::optional<TrainState> resume;
  std::function<void(const EpochRecord &)> on_epoch;
  std::ostream *log = nullptr;
  // Caps the number of training examples visited per epoch (0 = all).
  int max_examples_per_epoch = 0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  double best_val = 0.0;
  int best_epoch = 0;
  bool early_stopped = false;
  TrainState final_state;
};

// Adam with the plateau schedule above. The model is left holding the best
// parameters seen. Throws NumericError when a loss turns non-finite.
FitResult Fit(Model &model, std::span<const MixtureExample> train,
              std::span<const MixtureExample> dev, const TrainConfig &config,
              FitOptions options = {});

struct GradCheckEntry {
  std::string name;
  long index = 0;  // flat column-major index into the parameter
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckResult {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
};

// Compares d TotalLoss / d theta against central differences of step h for the
// listed (parameter name, flat index) pairs. Relative error is
// |a - n| / max(|a|, |n|, 1e-7).
GradCheckResult GradCheck(Model &model, const MixtureExample &example,
                          const std::vector<std::pair<std::string, long>> &entries,
                          double h, double gamma = 0.5, int speaker_label = 0);

}  // namespace stagex

#endif  // STAGEX_TRAINING_HPP_
