// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Synthetic corpus: parametric harmonic "speakers", two-talker mixtures at
// 0-5 dB, optional pink noise and exponential-decay reverberation, persisted
// as PCM16 WAV files plus a line-delimited JSON manifest.

#ifndef STAGEX_DATASET_HPP_
#define STAGEX_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stagex/signal.hpp"

namespace stagex {

enum class Condition { kClean, kNoise, kReverb, kNoiseReverb };
enum class Split { kTrain, kDev, kTest };

std::string ToString(Condition c);
std::string ToString(Split s);
Condition ParseCondition(const std::string &name);
Split ParseSplit(const std::string &name);

struct SpeakerProfile {
  int speaker_id = 0;
  double f0 = 120.0;                   // Hz
  std::vector<double> harmonic_gains;  // linear amplitude of harmonic h+1
  double spectral_tilt = -6.0;         // dB / octave, folded into the gains
  double jitter = 0.01;                // relative f0 perturbation std
};

// Deterministic in (speaker_id, corpus_seed). Fundamentals are spread over
// 90-300 Hz by a golden-ratio sequence on the id, so neighbouring ids land far
// apart and later ids fill the gaps between earlier ones.
SpeakerProfile MakeSpeakerProfile(int speaker_id, std::uint64_t corpus_seed);

// Syllable-like harmonic bursts separated by silences, 8 kHz, peak 0.9.
Waveform RenderUtterance(const SpeakerProfile &profile, double duration_s,
                         std::uint64_t utterance_seed);

struct MixtureExample {
  Waveform mixture;
  Waveform reference;
  Waveform target;
  int speaker_id = 0;
  Condition condition = Condition::kClean;
  double snr_db = 0.0;
  // In-memory only: the scaled interfering source (dry) and additive noise.
  Waveform interferer;
  Waveform noise;
};

struct AugmentParams {
  double noise_snr_db = 5.0;  // mixture-to-noise ratio
  double rt60_s = 0.25;
};

// noise_snr_db ~ U[0, 10], rt60_s ~ U[0.1, 0.4].
AugmentParams DrawAugmentParams(std::uint64_t aug_seed);

// Adds the requested degradation to a clean example. Reverberation is applied
// to each source before re-mixing; the target stays the dry direct path.
// Requesting kClean returns the example unchanged.
MixtureExample AugmentCondition(const MixtureExample &example, Condition condition,
                                std::uint64_t aug_seed);
MixtureExample AugmentCondition(const MixtureExample &example, Condition condition,
                                const AugmentParams &params, std::uint64_t aug_seed);

// Exponential-decay impulse response with a unit direct path at index 0.
std::vector<double> MakeImpulseResponse(double rt60_s, std::uint64_t seed);
// First `signal.size()` samples of the full convolution.
Waveform ConvolveTruncated(const Waveform &signal, const std::vector<double> &ir);
Waveform PinkNoise(std::size_t length, std::uint64_t seed);

struct ManifestRecord {
  std::string mixture_path;  // relative to the manifest directory
  std::string reference_path;
  std::string target_path;
  int speaker_id = 0;
  Condition condition = Condition::kClean;
  double snr_db = 0.0;
  Split split = Split::kTrain;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRecord> records;

  Manifest Filter(std::optional<Split> split, std::optional<Condition> condition = {}) const;
  std::vector<int> SpeakerIds(std::optional<Split> split = {}) const;
};

// One JSON object per line, keys in the fixed order mixture_path,
// reference_path, target_path, speaker_id, condition, snr_db, split.
void SaveManifest(const Manifest &manifest, const std::filesystem::path &path);
Manifest LoadManifest(const std::filesystem::path &path);

MixtureExample LoadExample(const Manifest &manifest, const ManifestRecord &record);

enum class ConditionPolicy {
  kReplicate,  // every clean mixture appears once per requested condition
  kCycle,      // train/dev mixtures take the requested conditions in turn
};

struct CorpusConfig {
  int num_speakers = 6;
  int test_speakers = 2;  // the highest ids; unseen in train/dev
  int utterances_per_speaker = 12;
  std::uint64_t corpus_seed = 1;
  double utterance_seconds = 2.0;  // mixture length
  double reference_seconds = 2.0;
  int num_train = 200;
  int num_dev = 40;
  int num_test = 40;
  std::vector<Condition> conditions{Condition::kClean};
  ConditionPolicy train_condition_policy = ConditionPolicy::kReplicate;

  void Validate() const;  // ArgumentError
  int train_speakers() const { return num_speakers - test_speakers; }
};

nlohmann::ordered_json ToJson(const CorpusConfig &config);
CorpusConfig CorpusConfigFromJson(const nlohmann::json &j);  // ConfigError

inline constexpr const char *kManifestFile = "manifest.jsonl";
inline constexpr const char *kChecksumFile = "checksums.txt";

// Renders every utterance, builds train/dev/test mixtures and writes WAVs,
// manifest.jsonl and checksums.txt under out_dir. Train and dev share the
// training roster (dev uses held-out utterances); test uses only the unseen
// speakers. Each reference is a different utterance of the target speaker.
Manifest GenerateCorpus(const CorpusConfig &config, const std::filesystem::path &out_dir);

// True when out_dir holds a corpus generated from exactly this config whose
// files still match their recorded checksums.
bool CorpusUpToDate(const CorpusConfig &config, const std::filesystem::path &out_dir);

std::uint32_t FileCrc32(const std::filesystem::path &path);

}  // namespace stagex

#endif  // STAGEX_DATASET_HPP_
