// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stagex/error.hpp"
#include "stagex/seed.hpp"
#include "stagex/wav_io.hpp"

namespace stagex {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinF0 = 90.0;
constexpr double kMaxF0 = 300.0;
constexpr double kMaxHarmonicHz = 3800.0;
constexpr double kPeak = 0.9;
constexpr double kGoldenFraction = 0.6180339887498949;

double Uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void PeakNormalize(std::vector<Waveform *> waves, double peak_limit) {
  double peak = 0.0;
  for (double x : waves.front()->samples) peak = std::max(peak, std::abs(x));
  if (peak <= peak_limit) return;
  const double g = peak_limit / peak;
  for (Waveform *w : waves) {
    for (double &x : w->samples) x *= g;
  }
}

Waveform Head(const Waveform &w, std::size_t n) {
  return Waveform(std::vector<double>(w.samples.begin(),
                                      w.samples.begin() + static_cast<long>(n)),
                  w.sample_rate);
}

void EnsureDir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError(dir.string(), "cannot create directory " + dir.string() + ": " +
                                    (ec ? ec.message() : "not a directory"));
  }
}

std::string Fingerprint(const CorpusConfig &c) {
  std::string s = ToJson(c).dump();
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x",
                static_cast<unsigned>(crc32(0L, reinterpret_cast<const Bytef *>(s.data()),
                                            static_cast<uInt>(s.size()))));
  return buf;
}

std::string IndexName(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", i);
  return buf;
}

}  // namespace

std::string ToString(Condition c) {
  switch (c) {
    case Condition::kClean: return "clean";
    case Condition::kNoise: return "noise";
    case Condition::kReverb: return "reverb";
    case Condition::kNoiseReverb: return "noise_reverb";
  }
  return "clean";
}

std::string ToString(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Condition ParseCondition(const std::string &name) {
  if (name == "clean") return Condition::kClean;
  if (name == "noise") return Condition::kNoise;
  if (name == "reverb") return Condition::kReverb;
  if (name == "noise_reverb") return Condition::kNoiseReverb;
  throw ArgumentError("unknown condition '" + name + "'");
}

Split ParseSplit(const std::string &name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw ArgumentError("unknown split '" + name + "'");
}

// ---------------------------------------------------------------------------

SpeakerProfile MakeSpeakerProfile(int speaker_id, std::uint64_t corpus_seed) {
  std::mt19937_64 rng(SeedOf(corpus_seed, 0x5eed, speaker_id));
  SpeakerProfile p;
  p.speaker_id = speaker_id;
  const double offset = Uniform(rng, 0.0, 1.0);
  double u = std::fmod(offset + kGoldenFraction * speaker_id, 1.0);
  p.f0 = kMinF0 * std::pow(kMaxF0 / kMinF0, u);
  p.spectral_tilt = Uniform(rng, -12.0, -3.0);
  p.jitter = Uniform(rng, 0.003, 0.015);

  // Two resonances shape the harmonic envelope on top of the tilt.
  const double f1 = Uniform(rng, 300.0, 900.0);
  const double f2 = Uniform(rng, 1000.0, 2600.0);
  const double bw1 = Uniform(rng, 80.0, 200.0);
  const double bw2 = Uniform(rng, 120.0, 300.0);
  const int harmonics = static_cast<int>(kMaxHarmonicHz / p.f0);
  for (int h = 1; h <= harmonics; ++h) {
    const double f = h * p.f0;
    const double tilt = std::pow(10.0, p.spectral_tilt * std::log2(h) / 20.0);
    const double res = 0.3 + std::exp(-0.5 * std::pow((f - f1) / bw1, 2)) +
                       0.7 * std::exp(-0.5 * std::pow((f - f2) / bw2, 2));
    p.harmonic_gains.push_back(tilt * res);
  }
  return p;
}

Waveform RenderUtterance(const SpeakerProfile &profile, double duration_s,
                         std::uint64_t utterance_seed) {
  if (!(duration_s > 0.0)) throw ArgumentError("render_utterance: duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * kSampleRate));
  std::mt19937_64 rng(SeedOf(utterance_seed, 0xa11ce, profile.speaker_id));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> out(n, 0.0);

  std::vector<double> phase_offset(profile.harmonic_gains.size());
  for (double &ph : phase_offset) ph = Uniform(rng, 0.0, kTwoPi);

  std::size_t pos = static_cast<std::size_t>(Uniform(rng, 0.0, 0.1) * kSampleRate);
  double phase = 0.0;
  double jitter_state = 0.0;
  while (pos < n) {
    const auto syl = static_cast<std::size_t>(Uniform(rng, 0.12, 0.35) * kSampleRate);
    const auto gap = static_cast<std::size_t>(Uniform(rng, 0.03, 0.15) * kSampleRate);
    const double gain = Uniform(rng, 0.4, 1.0);
    const double pitch = 1.0 + Uniform(rng, -0.08, 0.08);
    const double glide = Uniform(rng, -0.06, 0.06);
    for (std::size_t i = 0; i < syl && pos + i < n; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(syl);
      // Slowly varying jitter: one-pole low-passed Gaussian noise.
      jitter_state = 0.995 * jitter_state + 0.1 * profile.jitter * gauss(rng);
      const double f0 = profile.f0 * pitch * (1.0 + glide * (x - 0.5)) * (1.0 + jitter_state);
      phase = std::fmod(phase + kTwoPi * f0 / kSampleRate, kTwoPi * 1024.0);
      const double env = gain * std::sqrt(std::sin(std::numbers::pi * x));
      double s = 0.0;
      for (std::size_t h = 0; h < profile.harmonic_gains.size(); ++h) {
        if ((h + 1) * f0 >= kMaxHarmonicHz) break;
        s += profile.harmonic_gains[h] * std::sin((h + 1) * phase + phase_offset[h]);
      }
      out[pos + i] = env * s;
    }
    pos += syl + gap;
  }

  double peak = 0.0;
  for (double x : out) peak = std::max(peak, std::abs(x));
  if (peak > 0.0) {
    for (double &x : out) x *= kPeak / peak;
  }
  return Waveform(std::move(out));
}

// ---------------------------------------------------------------------------

AugmentParams DrawAugmentParams(std::uint64_t aug_seed) {
  std::mt19937_64 rng(SeedOf(aug_seed, 0xa06));
  AugmentParams p;
  p.noise_snr_db = Uniform(rng, 0.0, 10.0);
  p.rt60_s = Uniform(rng, 0.1, 0.4);
  return p;
}

std::vector<double> MakeImpulseResponse(double rt60_s, std::uint64_t seed) {
  if (!(rt60_s > 0.0)) throw ArgumentError("impulse response: rt60 must be positive");
  const auto len = static_cast<std::size_t>(rt60_s * kSampleRate);
  std::mt19937_64 rng(SeedOf(seed, 0x1b));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> ir(std::max<std::size_t>(len, 1), 0.0);
  ir[0] = 1.0;
  // 60 dB of amplitude decay over rt60: exp(-ln(1000) * n / len).
  const double decay = std::log(1000.0) / static_cast<double>(std::max<std::size_t>(len, 1));
  for (std::size_t i = 1; i < ir.size(); ++i) {
    ir[i] = 0.05 * gauss(rng) * std::exp(-decay * static_cast<double>(i));
  }
  return ir;
}

Waveform ConvolveTruncated(const Waveform &signal, const std::vector<double> &ir) {
  const std::size_t n = signal.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < ir.size() && k < n; ++k) {
    const double h = ir[k];
    if (h == 0.0) continue;
    for (std::size_t i = k; i < n; ++i) out[i] += h * signal.samples[i - k];
  }
  return Waveform(std::move(out), signal.sample_rate);
}

Waveform PinkNoise(std::size_t length, std::uint64_t seed) {
  // Paul Kellet's economy pinking filter on white Gaussian noise.
  std::mt19937_64 rng(SeedOf(seed, 0x9124));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> out(length);
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (double &x : out) {
    const double w = gauss(rng);
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    x = b0 + b1 + b2 + w * 0.1848;
  }
  return Waveform(std::move(out));
}

MixtureExample AugmentCondition(const MixtureExample &example, Condition condition,
                                std::uint64_t aug_seed) {
  return AugmentCondition(example, condition, DrawAugmentParams(aug_seed), aug_seed);
}

MixtureExample AugmentCondition(const MixtureExample &example, Condition condition,
                                const AugmentParams &params, std::uint64_t aug_seed) {
  if (condition == Condition::kClean) return example;
  if (example.condition != Condition::kClean) {
    throw ArgumentError("augment_condition: input must be a clean example, got " +
                        ToString(example.condition));
  }
  MixtureExample out = example;
  out.condition = condition;
  Waveform interferer = example.interferer;
  if (interferer.empty()) {
    interferer = example.mixture;
    for (std::size_t i = 0; i < interferer.size(); ++i) {
      interferer.samples[i] -= example.target.samples[i];
    }
  }
  out.interferer = interferer;

  const bool reverb = condition == Condition::kReverb || condition == Condition::kNoiseReverb;
  const bool noise = condition == Condition::kNoise || condition == Condition::kNoiseReverb;
  if (reverb) {
    Waveform wet_t = ConvolveTruncated(example.target,
                                       MakeImpulseResponse(params.rt60_s, SeedOf(aug_seed, 1)));
    Waveform wet_i = ConvolveTruncated(interferer,
                                       MakeImpulseResponse(params.rt60_s, SeedOf(aug_seed, 2)));
    for (std::size_t i = 0; i < wet_t.size(); ++i) {
      out.mixture.samples[i] = wet_t.samples[i] + wet_i.samples[i];
    }
    out.interferer = std::move(wet_i);
  }
  if (noise) {
    Waveform pink = PinkNoise(out.mixture.size(), SeedOf(aug_seed, 3));
    const double gain = std::sqrt(Power(out.mixture.view()) /
                                  (Power(pink.view()) * std::pow(10.0, params.noise_snr_db / 10.0)));
    for (std::size_t i = 0; i < pink.size(); ++i) {
      pink.samples[i] *= gain;
      out.mixture.samples[i] += pink.samples[i];
    }
    out.noise = std::move(pink);
  }
  std::vector<Waveform *> group{&out.mixture, &out.target, &out.interferer};
  if (!out.noise.empty()) group.push_back(&out.noise);
  PeakNormalize(group, 1.0);
  return out;
}

// ---------------------------------------------------------------------------

Manifest Manifest::Filter(std::optional<Split> split, std::optional<Condition> condition) const {
  Manifest m;
  m.base_dir = base_dir;
  for (const auto &r : records) {
    if (split && r.split != *split) continue;
    if (condition && r.condition != *condition) continue;
    m.records.push_back(r);
  }
  return m;
}

std::vector<int> Manifest::SpeakerIds(std::optional<Split> split) const {
  std::set<int> ids;
  for (const auto &r : records) {
    if (!split || r.split == *split) ids.insert(r.speaker_id);
  }
  return {ids.begin(), ids.end()};
}

void SaveManifest(const Manifest &manifest, const fs::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write manifest " + path.string());
  for (const auto &r : manifest.records) {
    nlohmann::ordered_json j;
    j["mixture_path"] = r.mixture_path;
    j["reference_path"] = r.reference_path;
    j["target_path"] = r.target_path;
    j["speaker_id"] = r.speaker_id;
    j["condition"] = ToString(r.condition);
    j["snr_db"] = r.snr_db;
    j["split"] = ToString(r.split);
    out << j.dump() << '\n';
  }
  if (!out) throw IoError(path.string(), "write failed: " + path.string());
}

Manifest LoadManifest(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ManifestRecord r;
      r.mixture_path = j.at("mixture_path").get<std::string>();
      r.reference_path = j.at("reference_path").get<std::string>();
      r.target_path = j.at("target_path").get<std::string>();
      r.speaker_id = j.at("speaker_id").get<int>();
      r.condition = ParseCondition(j.at("condition").get<std::string>());
      r.snr_db = j.at("snr_db").get<double>();
      r.split = ParseSplit(j.at("split").get<std::string>());
      m.records.push_back(std::move(r));
    } catch (const std::exception &e) {
      throw FormatError("manifest", path.string() + ":" + std::to_string(lineno) + ": " +
                                        e.what());
    }
  }
  return m;
}

MixtureExample LoadExample(const Manifest &manifest, const ManifestRecord &record) {
  MixtureExample ex;
  ex.mixture = LoadWav(manifest.base_dir / record.mixture_path);
  ex.reference = LoadWav(manifest.base_dir / record.reference_path);
  ex.target = LoadWav(manifest.base_dir / record.target_path);
  ex.speaker_id = record.speaker_id;
  ex.condition = record.condition;
  ex.snr_db = record.snr_db;
  if (ex.mixture.size() != ex.target.size()) {
    throw FormatError("length", record.mixture_path + ": mixture and target lengths differ");
  }
  return ex;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json ToJson(const CorpusConfig &c) {
  nlohmann::ordered_json j;
  j["num_speakers"] = c.num_speakers;
  j["test_speakers"] = c.test_speakers;
  j["utterances_per_speaker"] = c.utterances_per_speaker;
  j["corpus_seed"] = c.corpus_seed;
  j["utterance_seconds"] = c.utterance_seconds;
  j["reference_seconds"] = c.reference_seconds;
  j["num_train"] = c.num_train;
  j["num_dev"] = c.num_dev;
  j["num_test"] = c.num_test;
  std::vector<std::string> conds;
  for (Condition cond : c.conditions) conds.push_back(ToString(cond));
  j["conditions"] = conds;
  j["train_condition_policy"] =
      c.train_condition_policy == ConditionPolicy::kCycle ? "cycle" : "replicate";
  return j;
}

CorpusConfig CorpusConfigFromJson(const nlohmann::json &j) {
  if (!j.is_object()) throw ConfigError("corpus config: expected an object");
  CorpusConfig c;
  const nlohmann::ordered_json known = ToJson(c);
  for (const auto &[key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("corpus config: unknown key '" + key + "'");
  }
  try {
    auto get = [&j](const char *key, auto &field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("num_speakers", c.num_speakers);
    get("test_speakers", c.test_speakers);
    get("utterances_per_speaker", c.utterances_per_speaker);
    get("corpus_seed", c.corpus_seed);
    get("utterance_seconds", c.utterance_seconds);
    get("reference_seconds", c.reference_seconds);
    get("num_train", c.num_train);
    get("num_dev", c.num_dev);
    get("num_test", c.num_test);
    if (j.contains("conditions")) {
      c.conditions.clear();
      for (const auto &name : j.at("conditions")) {
        c.conditions.push_back(ParseCondition(name.get<std::string>()));
      }
    }
    if (j.contains("train_condition_policy")) {
      const std::string p = j.at("train_condition_policy").get<std::string>();
      if (p == "replicate") {
        c.train_condition_policy = ConditionPolicy::kReplicate;
      } else if (p == "cycle") {
        c.train_condition_policy = ConditionPolicy::kCycle;
      } else {
        throw ConfigError("corpus config: train_condition_policy must be replicate|cycle");
      }
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("corpus config: ") + e.what());
  } catch (const ArgumentError &e) {
    throw ConfigError(std::string("corpus config: ") + e.what());
  }
  return c;
}

void CorpusConfig::Validate() const {
  if (num_speakers < 4) throw ArgumentError("generate_corpus: num_speakers must be >= 4");
  if (test_speakers < 2 || num_speakers - test_speakers < 2) {
    throw ArgumentError(
        "generate_corpus: too few speakers for disjoint splits (need >= 2 train and "
        ">= 2 test speakers)");
  }
  if (utterances_per_speaker < 4) {
    throw ArgumentError("generate_corpus: utterances_per_speaker must be >= 4");
  }
  if (!(utterance_seconds > 0.0) || !(reference_seconds > 0.0)) {
    throw ArgumentError("generate_corpus: durations must be positive");
  }
  if (num_train < 1 || num_dev < 1 || num_test < 1) {
    throw ArgumentError("generate_corpus: split sizes must be >= 1");
  }
  if (conditions.empty()) throw ArgumentError("generate_corpus: no conditions requested");
}

Manifest GenerateCorpus(const CorpusConfig &config, const fs::path &out_dir) {
  config.Validate();
  EnsureDir(out_dir);

  const int nspk = config.num_speakers;
  const int nutt = config.utterances_per_speaker;
  const double render_s = std::max(config.utterance_seconds, config.reference_seconds);
  const auto mix_len = static_cast<std::size_t>(std::llround(config.utterance_seconds * kSampleRate));
  const auto ref_len = static_cast<std::size_t>(std::llround(config.reference_seconds * kSampleRate));

  std::vector<std::vector<Waveform>> utts(static_cast<std::size_t>(nspk));
  for (int s = 0; s < nspk; ++s) {
    SpeakerProfile prof = MakeSpeakerProfile(s, config.corpus_seed);
    for (int u = 0; u < nutt; ++u) {
      utts[s].push_back(RenderUtterance(prof, render_s, SeedOf(config.corpus_seed, s, u)));
    }
  }

  // Train speakers hold out their last quarter of utterances for dev.
  const int dev_utts = std::max(2, nutt / 4);
  struct Pool {
    std::vector<int> speakers;
    int utt_begin, utt_end;
  };
  std::vector<int> train_roster, test_roster;
  for (int s = 0; s < config.train_speakers(); ++s) train_roster.push_back(s);
  for (int s = config.train_speakers(); s < nspk; ++s) test_roster.push_back(s);
  const std::map<Split, Pool> pools = {
      {Split::kTrain, {train_roster, 0, nutt - dev_utts}},
      {Split::kDev, {train_roster, nutt - dev_utts, nutt}},
      {Split::kTest, {test_roster, 0, nutt}},
  };
  const std::map<Split, int> counts = {
      {Split::kTrain, config.num_train}, {Split::kDev, config.num_dev}, {Split::kTest, config.num_test}};

  Manifest manifest;
  manifest.base_dir = out_dir;
  std::vector<fs::path> written;
  auto write = [&](const Waveform &w, const std::string &rel) {
    SaveWav(w, out_dir / rel);
    written.push_back(rel);
  };

  for (Split split : {Split::kTrain, Split::kDev, Split::kTest}) {
    const Pool &pool = pools.at(split);
    const std::string sname = ToString(split);
    EnsureDir(out_dir / sname);
    for (Condition c : config.conditions) EnsureDir(out_dir / sname / ToString(c));
    std::mt19937_64 rng(SeedOf(config.corpus_seed, 0x3117, static_cast<int>(split)));
    auto pick = [&rng](int lo, int hi) {
      return std::uniform_int_distribution<int>(lo, hi - 1)(rng);
    };
    const int nspk_pool = static_cast<int>(pool.speakers.size());
    for (int i = 0; i < counts.at(split); ++i) {
      const int tpos = i % nspk_pool;
      int ipos = pick(0, nspk_pool - 1);
      if (ipos >= tpos) ++ipos;
      const int tspk = pool.speakers[tpos];
      const int ispk = pool.speakers[ipos];
      const int tu = pick(pool.utt_begin, pool.utt_end);
      const int iu = pick(pool.utt_begin, pool.utt_end);
      int ru = pick(pool.utt_begin, pool.utt_end - 1);
      if (ru >= tu) ++ru;
      const double snr = std::uniform_real_distribution<double>(0.0, 5.0)(rng);

      MixResult mix = MixAtSnr(Head(utts[tspk][tu], mix_len), Head(utts[ispk][iu], mix_len), snr);
      MixtureExample clean;
      clean.mixture = std::move(mix.mixture);
      clean.target = std::move(mix.target);
      clean.interferer = std::move(mix.scaled_interferer);
      clean.reference = Head(utts[tspk][ru], ref_len);
      clean.speaker_id = tspk;
      clean.snr_db = snr;

      const std::string stem = IndexName(i);
      const std::string ref_rel = sname + "/" + stem + "_ref.wav";
      write(clean.reference, ref_rel);

      std::vector<Condition> conds = config.conditions;
      if (split != Split::kTest && config.train_condition_policy == ConditionPolicy::kCycle) {
        conds = {config.conditions[static_cast<std::size_t>(i) % config.conditions.size()]};
      }
      for (Condition c : conds) {
        MixtureExample ex =
            AugmentCondition(clean, c, SeedOf(config.corpus_seed, static_cast<int>(split), i,
                                              static_cast<int>(c)));
        const std::string dir = sname + "/" + ToString(c) + "/";
        ManifestRecord rec;
        rec.mixture_path = dir + stem + "_mix.wav";
        rec.target_path = dir + stem + "_tgt.wav";
        rec.reference_path = ref_rel;
        rec.speaker_id = tspk;
        rec.condition = c;
        rec.snr_db = snr;
        rec.split = split;
        write(ex.mixture, rec.mixture_path);
        write(ex.target, rec.target_path);
        manifest.records.push_back(std::move(rec));
      }
    }
  }

  SaveManifest(manifest, out_dir / kManifestFile);
  written.push_back(kManifestFile);

  std::ofstream sums(out_dir / kChecksumFile, std::ios::trunc);
  if (!sums) throw IoError((out_dir / kChecksumFile).string(), "cannot write checksums");
  sums << "config " << Fingerprint(config) << '\n';
  for (const auto &rel : written) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(FileCrc32(out_dir / rel)));
    sums << buf << ' ' << rel.generic_string() << '\n';
  }
  return manifest;
}

bool CorpusUpToDate(const CorpusConfig &config, const fs::path &out_dir) {
  std::ifstream in(out_dir / kChecksumFile);
  if (!in) return false;
  std::string tag, value;
  if (!(in >> tag >> value) || tag != "config" || value != Fingerprint(config)) return false;
  std::string crc, rel;
  int files = 0;
  while (in >> crc >> rel) {
    std::error_code ec;
    if (!fs::is_regular_file(out_dir / rel, ec)) return false;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(FileCrc32(out_dir / rel)));
    if (crc != buf) return false;
    ++files;
  }
  return files > 0;
}

std::uint32_t FileCrc32(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open " + path.string());
  uLong crc = crc32(0L, Z_NULL, 0);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof(buf));
    std::streamsize got = in.gcount();
    if (got > 0) crc = crc32(crc, reinterpret_cast<const Bytef *>(buf), static_cast<uInt>(got));
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace stagex
