// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "stagex/error.hpp"
#include "stagex/training.hpp"
#include "test_util.hpp"

using namespace stagex;

namespace {

double CrossEntropyOracle(const ag::Matrix &z, int label) {
  long double total = 0;
  for (long i = 0; i < z.rows(); ++i) total += std::exp(static_cast<long double>(z(i, 0)));
  return static_cast<double>(std::log(total) - z(label, 0));
}

TrainConfig FastConfig() {
  TrainConfig c;
  c.max_epochs = 3;
  c.segment_seconds = 0.05;
  c.batch_size = 2;
  c.seed = 11;
  return c;
}

void CheckSameParams(const Model &a, const Model &b) {
  auto pa = a.Snapshot(), pb = b.Snapshot();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
}

}  // namespace

TEST_CASE("total loss matches per-stage oracles") {
  Model model(testutil::TinyModel(2, true), 1);
  auto ex = testutil::TinyExamples(1)[0];
  PipelineOutput out = ForwardPipeline(model, ex.mixture, ex.reference);
  const double gamma = 0.5;
  ag::Var loss = TotalLoss(out, ex.target.view(), 1, gamma);

  double expected = 0;
  for (const StageOutput &st : out.stages) {
    const ag::Matrix &f = st.fused.value();
    std::vector<double> est(f.data(), f.data() + f.size());
    expected += -oracle::SiSdr(est, ex.target.samples) / 2.0;
    expected += gamma * CrossEntropyOracle(st.speaker_logits.value(), 1) / 2.0;
  }
  CHECK(loss.scalar() == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("a perfect estimate contributes the -60 dB floor") {
  Model model(testutil::TinyModel(1, false), 1);
  auto ex = testutil::TinyExamples(1)[0];
  PipelineOutput out = ForwardPipeline(model, ex.mixture, ex.reference);
  const ag::Matrix &f = out.stages[0].fused.value();
  std::vector<double> self(f.data(), f.data() + f.size());
  CHECK(TotalLoss(out, self, 0, 0.0).scalar() == -60.0);
  // With gamma = 0 the speaker label is irrelevant.
  CHECK(TotalLoss(out, self, 2, 0.0).scalar() == -60.0);
}

TEST_CASE("schedule halves after two stagnant epochs and stops after six") {
  TrainConfig cfg = FastConfig();
  cfg.max_epochs = 20;
  const double metrics[] = {1, 2, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3};
  Model model(testutil::TinyModel(1, false), 2);
  auto data = testutil::TinyExamples(2);
  FitOptions opt;
  opt.validator = [&](const Model &, int epoch) { return metrics[epoch - 1]; };
  FitResult r = Fit(model, data, {}, cfg, opt);

  const double expected_lr[] = {1e-3, 1e-3, 1e-3, 1e-3, 1e-3, 5e-4, 5e-4, 2.5e-4, 2.5e-4};
  REQUIRE(r.history.size() == 9);
  for (int e = 0; e < 9; ++e) {
    CAPTURE(e);
    CHECK(r.history[e].epoch == e + 1);
    CHECK(r.history[e].lr == doctest::Approx(expected_lr[e]).epsilon(1e-15));
    CHECK(r.history[e].improved == (e < 3));
  }
  CHECK(r.early_stopped);
  CHECK(r.best_epoch == 3);
  CHECK(r.best_val == 3.0);

  TrainState s;
  s.lr = 1e-3;
  ApplySchedule(s, cfg, 1.0);
  ApplySchedule(s, cfg, 0.5);
  CHECK(s.lr == 1e-3);
  ApplySchedule(s, cfg, std::numeric_limits<double>::quiet_NaN());
  CHECK(s.lr == 5e-4);
  CHECK(s.epochs_since_best == 2);
}

TEST_CASE("fit is deterministic and restores the best parameters") {
  auto data = testutil::TinyExamples(4), dev = testutil::TinyExamples(2, 0.1, 9);
  TrainConfig cfg = FastConfig();
  Model a(testutil::TinyModel(2, true), 5), b(testutil::TinyModel(2, true), 5);
  FitResult ra = Fit(a, data, dev, cfg), rb = Fit(b, data, dev, cfg);
  CheckSameParams(a, b);
  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    CHECK(ra.history[i].train_loss == rb.history[i].train_loss);
  }
  CHECK(MeanFinalSiSdri(a, dev) == doctest::Approx(ra.best_val).epsilon(1e-12));
}

TEST_CASE("resuming from a saved state matches an uninterrupted run") {
  testutil::TempDir dir("resume");
  auto data = testutil::TinyExamples(4), dev = testutil::TinyExamples(2, 0.1, 9);
  TrainConfig cfg = FastConfig();
  cfg.max_epochs = 4;
  Model full(testutil::TinyModel(2, true), 5);
  FitResult whole = Fit(full, data, dev, cfg);

  TrainConfig first = cfg;
  first.max_epochs = 2;
  Model part(testutil::TinyModel(2, true), 5);
  FitOptions opt;
  opt.output_dir = dir.path();
  Fit(part, data, dev, first, opt);

  Model resumed(testutil::TinyModel(2, true), 77);
  FitOptions more;
  more.resume = LoadTrainState(resumed, dir / "last.state");
  CHECK(more.resume->epoch == 2);
  FitResult rest = Fit(resumed, data, dev, cfg, more);
  CheckSameParams(full, resumed);
  REQUIRE(rest.history.size() == whole.history.size());
  CHECK(rest.history.back().train_loss == whole.history.back().train_loss);

  Model other(testutil::TinyModel(1, false), 5);
  CHECK_THROWS_AS(LoadTrainState(other, dir / "last.state"), ConfigError);
}

TEST_CASE("gradcheck across encoder, speaker encoder, extractors, decoders and fusion") {
  Model model(testutil::TinyModel(2, true), 3);
  auto ex = testutil::TinyExamples(1)[0];
  std::vector<std::pair<std::string, long>> entries = {
      {"speech_encoder.w1", 3},          {"speech_encoder.w3", 40},
      {"speaker_encoder.proj.weight", 2}, {"speaker_encoder.in_conv.weight", 5},
      {"stage1.extractor.mix_proj", 4},  {"stage2.extractor.mix_proj", 7},
      {"stage2.extractor.frame_proj", 1}, {"stage1.decoder.w2", 9},
      {"stage2.decoder.w1", 4},          {"stage1.fusion.w1", 0},
      {"stage2.fusion.w3", 0}};
  GradCheckResult r = GradCheck(model, ex, entries, 1e-7, 0.5, ex.speaker_id);
  REQUIRE(r.entries.size() == entries.size());
  for (const auto &e : r.entries) {
    CAPTURE(e.name);
    CHECK(e.rel_error < 1e-3);
  }
}

TEST_CASE("non-finite losses abort with the batch seed") {
  Model model(testutil::TinyModel(1, false), 3);
  ag::Var w = model.parameters().Get("stage1.fusion.w1");
  w.mutable_value()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  auto data = testutil::TinyExamples(2);
  TrainConfig cfg = FastConfig();
  FitOptions opt;
  opt.validator = [](const Model &, int) { return 0.0; };
  try {
    Fit(model, data, {}, cfg, opt);
    FAIL("expected NumericError");
  } catch (const NumericError &e) {
    CHECK(std::string(e.what()).find("batch seed") != std::string::npos);
  }
}

TEST_CASE("train config validation and JSON round trip") {
  TrainConfig c = FastConfig();
  c.lr_init = 3e-4;
  TrainConfig back = TrainConfigFromJson(ToJson(c));
  CHECK(ToJson(back).dump() == ToJson(c).dump());
  CHECK_THROWS_AS(TrainConfigFromJson(nlohmann::json{{"epochs", 3}}), ConfigError);
  c.batch_size = 0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
}
