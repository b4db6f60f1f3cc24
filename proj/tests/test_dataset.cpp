// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <complex>
#include <set>

#include "stagex/dataset.hpp"
#include "stagex/error.hpp"
#include "stagex/wav_io.hpp"
#include "test_util.hpp"

using namespace stagex;

namespace {

// Magnitude spectrum by direct DFT over the first n samples.
std::vector<double> Magnitudes(const Waveform &w, std::size_t n, std::size_t bins) {
  std::vector<double> mag(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += w.samples[t] * std::polar(1.0, -2 * M_PI * static_cast<double>(k * t) / n);
    }
    mag[k] = std::abs(acc);
  }
  return mag;
}

double Correlation(const std::vector<double> &a, const std::vector<double> &b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

CorpusConfig SmallCorpus() {
  CorpusConfig c;
  c.num_speakers = 8;
  c.test_speakers = 2;
  c.utterances_per_speaker = 6;
  c.utterance_seconds = 0.5;
  c.reference_seconds = 0.4;
  c.num_train = 12;
  c.num_dev = 4;
  c.num_test = 4;
  return c;
}

}  // namespace

TEST_CASE("speaker profiles are deterministic and voice-like") {
  for (int id = 0; id < 40; ++id) {
    SpeakerProfile a = MakeSpeakerProfile(id, 3), b = MakeSpeakerProfile(id, 3);
    CHECK(a.f0 == b.f0);
    CHECK(a.harmonic_gains == b.harmonic_gains);
    CHECK(a.f0 >= 60.0);
    CHECK(a.f0 <= 400.0);
  }
}

TEST_CASE("render_utterance length, determinism and peak") {
  SpeakerProfile p = MakeSpeakerProfile(2, 1);
  Waveform a = RenderUtterance(p, 1.0, 42), b = RenderUtterance(p, 1.0, 42);
  CHECK(a.size() == 8000);
  CHECK(a.samples == b.samples);
  double peak = 0;
  for (double x : a.samples) peak = std::max(peak, std::abs(x));
  CHECK(peak == doctest::Approx(0.9));
  CHECK_THROWS_AS(RenderUtterance(p, 0.0, 1), ArgumentError);
}

TEST_CASE("different speakers have distinct spectra") {
  const std::size_t n = 2048, bins = 400;
  int distinct = 0, pairs = 0;
  for (int a = 0; a < 6; ++a) {
    for (int b = a + 1; b < 6; ++b) {
      Waveform wa = RenderUtterance(MakeSpeakerProfile(a, 1), 0.5, 7);
      Waveform wb = RenderUtterance(MakeSpeakerProfile(b, 1), 0.5, 7);
      ++pairs;
      if (Correlation(Magnitudes(wa, n, bins), Magnitudes(wb, n, bins)) < 0.95) ++distinct;
    }
  }
  CHECK(distinct == pairs);
}

TEST_CASE("augment_condition contracts") {
  SpeakerProfile p0 = MakeSpeakerProfile(0, 1), p1 = MakeSpeakerProfile(1, 1);
  MixResult mix = MixAtSnr(RenderUtterance(p0, 0.5, 1), RenderUtterance(p1, 0.5, 2), 2.0);
  MixtureExample clean;
  clean.mixture = mix.mixture;
  clean.target = mix.target;
  clean.interferer = mix.scaled_interferer;
  clean.reference = RenderUtterance(p0, 0.3, 3);

  MixtureExample same = AugmentCondition(clean, Condition::kClean, 9);
  CHECK(same.mixture.samples == clean.mixture.samples);
  CHECK(same.target.samples == clean.target.samples);

  AugmentParams params;
  params.noise_snr_db = 10.0;
  params.rt60_s = 0.3;
  MixtureExample noisy = AugmentCondition(clean, Condition::kNoise, params, 9);
  std::vector<double> speech(noisy.mixture.size());
  for (std::size_t i = 0; i < speech.size(); ++i) {
    speech[i] = noisy.mixture.samples[i] - noisy.noise.samples[i];
    CHECK(speech[i] == doctest::Approx(noisy.target.samples[i] + noisy.interferer.samples[i]).epsilon(1e-9));
  }
  CHECK(std::abs(SnrDb(speech, noisy.noise.view()) - 10.0) < 0.1);

  MixtureExample wet = AugmentCondition(clean, Condition::kReverb, params, 9);
  CHECK(wet.mixture.size() == clean.mixture.size());
  CHECK(wet.target.size() == clean.target.size());
  CHECK(wet.condition == Condition::kReverb);
  // The target stays the dry direct path, up to the shared peak gain.
  CHECK(SiSdr(wet.target, clean.target) == 60.0);
  CHECK(SiSdr(wet.mixture, clean.mixture) < 30.0);

  MixtureExample both = AugmentCondition(clean, Condition::kNoiseReverb, params, 9);
  CHECK(both.mixture.size() == clean.mixture.size());
  CHECK_THROWS_AS(AugmentCondition(both, Condition::kNoise, 1), ArgumentError);
}

TEST_CASE("impulse response has a unit direct path and decays") {
  auto ir = MakeImpulseResponse(0.25, 4);
  CHECK(ir.size() == 2000);
  CHECK(ir[0] == 1.0);
  double head = 0, tail = 0;
  for (std::size_t i = 1; i < 200; ++i) head += ir[i] * ir[i];
  for (std::size_t i = 1800; i < 2000; ++i) tail += ir[i] * ir[i];
  CHECK(tail < head * 1e-3);
}

TEST_CASE("generate_corpus splits, ranges and files") {
  testutil::TempDir dir("corpus");
  CorpusConfig cfg = SmallCorpus();
  Manifest m = GenerateCorpus(cfg, dir.path());
  CHECK(m.records.size() == 20);

  auto train_ids = m.SpeakerIds(Split::kTrain), test_ids = m.SpeakerIds(Split::kTest);
  std::set<int> train(train_ids.begin(), train_ids.end());
  for (int id : test_ids) CHECK(train.count(id) == 0);
  CHECK(test_ids == std::vector<int>{6, 7});
  for (int id : m.SpeakerIds(Split::kDev)) CHECK(train.count(id) == 1);
  for (const auto &r : m.records) {
    CHECK(r.snr_db >= 0.0);
    CHECK(r.snr_db <= 5.0);
  }

  Manifest loaded = LoadManifest(dir / kManifestFile);
  REQUIRE(loaded.records.size() == m.records.size());
  CHECK(loaded.records[3].mixture_path == m.records[3].mixture_path);
  CHECK(loaded.records[3].snr_db == m.records[3].snr_db);

  MixtureExample ex = LoadExample(loaded, loaded.records[0]);
  CHECK(ex.mixture.size() == 4000);
  CHECK(ex.reference.size() == 3200);
  CHECK(ex.target.size() == ex.mixture.size());

  std::string line = testutil::ReadBytes(dir / kManifestFile);
  line = line.substr(0, line.find('\n'));
  const char *order[] = {"mixture_path", "reference_path", "target_path", "speaker_id",
                         "condition", "snr_db", "split"};
  std::size_t pos = 0;
  for (const char *key : order) {
    std::size_t at = line.find(std::string("\"") + key + "\"");
    REQUIRE(at != std::string::npos);
    CHECK(at >= pos);
    pos = at;
  }
}

TEST_CASE("generation is byte-identical and up-to-date detection works") {
  testutil::TempDir a("gen_a"), b("gen_b");
  CorpusConfig cfg = SmallCorpus();
  GenerateCorpus(cfg, a.path());
  GenerateCorpus(cfg, b.path());
  CHECK(testutil::ReadBytes(a / kChecksumFile) == testutil::ReadBytes(b / kChecksumFile));
  CHECK(testutil::ReadBytes(a / "test/clean/00001_mix.wav") ==
        testutil::ReadBytes(b / "test/clean/00001_mix.wav"));

  CHECK(CorpusUpToDate(cfg, a.path()));
  CorpusConfig other = cfg;
  other.corpus_seed = 2;
  CHECK_FALSE(CorpusUpToDate(other, a.path()));
  testutil::WriteBytes(a / "train/00000_ref.wav", "tampered");
  CHECK_FALSE(CorpusUpToDate(cfg, a.path()));
}

TEST_CASE("condition policies") {
  testutil::TempDir dir("policy");
  CorpusConfig cfg = SmallCorpus();
  cfg.conditions = {Condition::kClean, Condition::kNoise, Condition::kReverb};
  Manifest rep = GenerateCorpus(cfg, dir / "rep");
  CHECK(rep.records.size() == 60);
  cfg.train_condition_policy = ConditionPolicy::kCycle;
  Manifest cyc = GenerateCorpus(cfg, dir / "cyc");
  CHECK(cyc.Filter(Split::kTrain).records.size() == 12);
  CHECK(cyc.Filter(Split::kTrain, Condition::kNoise).records.size() == 4);
  CHECK(cyc.Filter(Split::kTest).records.size() == 12);
}

TEST_CASE("corpus config validation and JSON round trip") {
  CorpusConfig bad = SmallCorpus();
  bad.test_speakers = 1;
  CHECK_THROWS_AS(bad.Validate(), ArgumentError);
  CorpusConfig c = SmallCorpus();
  c.conditions = {Condition::kNoise, Condition::kNoiseReverb};
  CorpusConfig back = CorpusConfigFromJson(ToJson(c));
  CHECK(ToJson(back).dump() == ToJson(c).dump());
  CHECK_THROWS_AS(CorpusConfigFromJson(nlohmann::json{{"bogus", 1}}), ConfigError);
}

TEST_CASE("malformed manifest lines are format errors") {
  testutil::TempDir dir("badmanifest");
  testutil::WriteBytes(dir / "m.jsonl", "{\"mixture_path\": 3}\n");
  CHECK_THROWS_AS(LoadManifest(dir / "m.jsonl"), FormatError);
  CHECK_THROWS_AS(LoadManifest(dir / "missing.jsonl"), IoError);
}
