// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "stagex/checkpoint.hpp"
#include "stagex/dataset.hpp"
#include "stagex/error.hpp"
#include "stagex/evaluate.hpp"
#include "stagex/run_config.hpp"
#include "stagex/training.hpp"
#include "stagex/wav_io.hpp"

struct stagex_config {
  stagex::RunConfig value;
};

struct stagex_model {
  stagex::Model value;
};

namespace {

namespace fs = std::filesystem;

thread_local std::string g_last_error;

stagex_status Fail(stagex_status status, const std::string &message) {
  g_last_error = message;
  return status;
}

template <typename F>
stagex_status Guard(F &&body) {
  try {
    body();
    return STAGEX_OK;
  } catch (const stagex::CorruptArtifactError &e) {
    return Fail(STAGEX_ERR_CORRUPT, e.what());
  } catch (const stagex::ConfigError &e) {
    return Fail(STAGEX_ERR_CONFIG, e.what());
  } catch (const stagex::NumericError &e) {
    return Fail(STAGEX_ERR_NUMERIC, e.what());
  } catch (const stagex::IoError &e) {
    return Fail(STAGEX_ERR_IO, e.what());
  } catch (const stagex::FormatError &e) {
    return Fail(STAGEX_ERR_FORMAT, e.what());
  } catch (const stagex::ArgumentError &e) {
    return Fail(STAGEX_ERR_ARGUMENT, e.what());
  } catch (const fs::filesystem_error &e) {
    return Fail(STAGEX_ERR_IO, e.what());
  } catch (const std::bad_alloc &) {
    return Fail(STAGEX_ERR_INTERNAL, "out of memory");
  } catch (const std::exception &e) {
    return Fail(STAGEX_ERR_INTERNAL, e.what());
  }
}

char *CopyString(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void Require(bool cond, const char *what) {
  if (!cond) throw stagex::ArgumentError(what);
}

std::span<const double> Span(const double *p, std::size_t n) { return {p, n}; }

stagex::Waveform Wave(const double *p, std::size_t n) {
  return stagex::Waveform(std::vector<double>(p, p + n));
}

std::vector<stagex::MixtureExample> LoadSplit(const stagex::Manifest &manifest,
                                              stagex::Split split) {
  std::vector<stagex::MixtureExample> out;
  for (const auto &rec : manifest.records) {
    if (rec.split == split) out.push_back(stagex::LoadExample(manifest, rec));
  }
  return out;
}

class LineSink : public std::stringbuf {
 public:
  LineSink(stagex_log_fn fn, void *user) : fn_(fn), user_(user) {}

 protected:
  int sync() override {
    std::string s = str();
    std::size_t start = 0, nl;
    while ((nl = s.find('\n', start)) != std::string::npos) {
      if (fn_) fn_(s.substr(start, nl - start).c_str(), user_);
      start = nl + 1;
    }
    str(s.substr(start));
    return 0;
  }

 private:
  stagex_log_fn fn_;
  void *user_;
};

}  // namespace

extern "C" {

const char *stagex_version(void) { return "0.1.0"; }

const char *stagex_last_error(void) { return g_last_error.c_str(); }

const char *stagex_status_name(stagex_status status) {
  switch (status) {
    case STAGEX_OK: return "ok";
    case STAGEX_ERR_ARGUMENT: return "argument";
    case STAGEX_ERR_CONFIG: return "config";
    case STAGEX_ERR_IO: return "io";
    case STAGEX_ERR_FORMAT: return "format";
    case STAGEX_ERR_NUMERIC: return "numeric";
    case STAGEX_ERR_CORRUPT: return "corrupt";
    case STAGEX_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void stagex_free(void *ptr) { std::free(ptr); }

stagex_status stagex_si_sdr(const double *estimate, const double *reference, size_t n,
                            double *out_db) {
  return Guard([&] {
    Require(estimate && reference && out_db, "stagex_si_sdr: null pointer");
    *out_db = stagex::SiSdr(Span(estimate, n), Span(reference, n));
  });
}

stagex_status stagex_sdr(const double *estimate, const double *reference, size_t n,
                         double *out_db) {
  return Guard([&] {
    Require(estimate && reference && out_db, "stagex_sdr: null pointer");
    *out_db = stagex::Sdr(Span(estimate, n), Span(reference, n));
  });
}

stagex_status stagex_improvement(const double *estimate, const double *mixture,
                                 const double *target, size_t n, double *out_sdri,
                                 double *out_si_sdri) {
  return Guard([&] {
    Require(estimate && mixture && target && out_sdri && out_si_sdri,
            "stagex_improvement: null pointer");
    stagex::Improvement imp =
        stagex::ComputeImprovement(Wave(estimate, n), Wave(mixture, n), Wave(target, n));
    *out_sdri = imp.sdri;
    *out_si_sdri = imp.si_sdri;
  });
}

stagex_status stagex_wav_read(const char *path, double **out_samples, size_t *out_len) {
  return Guard([&] {
    Require(path && out_samples && out_len, "stagex_wav_read: null pointer");
    stagex::Waveform w = stagex::LoadWav(path);
    auto *buf = static_cast<double *>(std::malloc(std::max<std::size_t>(1, w.size()) * sizeof(double)));
    if (buf == nullptr) throw std::bad_alloc();
    std::copy(w.samples.begin(), w.samples.end(), buf);
    *out_samples = buf;
    *out_len = w.size();
  });
}

stagex_status stagex_wav_write(const char *path, const double *samples, size_t n) {
  return Guard([&] {
    Require(path && (samples || n == 0), "stagex_wav_write: null pointer");
    stagex::SaveWav(Wave(samples, n), path);
  });
}

stagex_status stagex_config_default(stagex_config **out) {
  return Guard([&] {
    Require(out, "stagex_config_default: null pointer");
    *out = new stagex_config{};
  });
}

stagex_status stagex_config_load(const char *path, stagex_config **out) {
  return Guard([&] {
    Require(path && out, "stagex_config_load: null pointer");
    *out = new stagex_config{stagex::LoadRunConfig(path)};
  });
}

stagex_status stagex_config_set(stagex_config *config, const char *key, const char *value) {
  return Guard([&] {
    Require(config && key && value, "stagex_config_set: null pointer");
    stagex::ApplyOverride(config->value, key, value);
  });
}

stagex_status stagex_config_get(const stagex_config *config, const char *key, char **out_value) {
  return Guard([&] {
    Require(config && key && out_value, "stagex_config_get: null pointer");
    *out_value = CopyString(stagex::GetConfigValue(config->value, key).dump());
  });
}

stagex_status stagex_config_to_json(const stagex_config *config, char **out_json) {
  return Guard([&] {
    Require(config && out_json, "stagex_config_to_json: null pointer");
    *out_json = CopyString(stagex::ToJson(config->value).dump(2));
  });
}

stagex_status stagex_config_keys(char **out_keys) {
  return Guard([&] {
    Require(out_keys, "stagex_config_keys: null pointer");
    std::string s;
    for (const std::string &k : stagex::RunConfigKeys()) s += k + "\n";
    *out_keys = CopyString(s);
  });
}

void stagex_config_free(stagex_config *config) { delete config; }

stagex_status stagex_gen_data(const stagex_config *config, int *out_up_to_date,
                              char **out_summary) {
  return Guard([&] {
    Require(config, "stagex_gen_data: null config");
    const stagex::RunConfig &rc = config->value;
    const fs::path dir = rc.data_dir;
    bool fresh = stagex::CorpusUpToDate(rc.corpus, dir);
    stagex::Manifest manifest = fresh ? stagex::LoadManifest(dir / stagex::kManifestFile)
                                      : stagex::GenerateCorpus(rc.corpus, dir);
    if (out_up_to_date) *out_up_to_date = fresh ? 1 : 0;
    if (out_summary) {
      std::ostringstream os;
      os << (fresh ? "up-to-date: " : "wrote ") << (dir / stagex::kManifestFile).string() << '\n';
      for (stagex::Split split : {stagex::Split::kTrain, stagex::Split::kDev, stagex::Split::kTest}) {
        std::map<std::string, int> counts;
        for (const auto &rec : manifest.records) {
          if (rec.split == split) ++counts[stagex::ToString(rec.condition)];
        }
        os << "  " << stagex::ToString(split) << ":";
        for (const auto &[cond, n] : counts) os << ' ' << cond << '=' << n;
        os << "  speakers:";
        for (int id : manifest.SpeakerIds(split)) os << ' ' << id;
        os << '\n';
      }
      *out_summary = CopyString(os.str());
    }
  });
}

stagex_status stagex_train(const stagex_config *config, int resume, stagex_log_fn log,
                           void *user) {
  return Guard([&] {
    Require(config, "stagex_train: null config");
    const stagex::RunConfig &rc = config->value;
    rc.Validate();
    const fs::path manifest_path = fs::path(rc.data_dir) / stagex::kManifestFile;
    stagex::Manifest manifest = stagex::LoadManifest(manifest_path);
    std::vector<stagex::MixtureExample> train = LoadSplit(manifest, stagex::Split::kTrain);
    std::vector<stagex::MixtureExample> dev = LoadSplit(manifest, stagex::Split::kDev);
    if (train.empty() || dev.empty()) {
      throw stagex::ConfigError("manifest " + manifest_path.string() +
                                " has no train or dev examples");
    }
    for (const auto &ex : train) {
      if (ex.speaker_id < 0 || ex.speaker_id >= rc.model.num_speakers) {
        throw stagex::ConfigError("training speaker id " + std::to_string(ex.speaker_id) +
                                  " outside the classifier range [0, " +
                                  std::to_string(rc.model.num_speakers) + ")");
      }
    }

    const fs::path run_dir = rc.run_dir;
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec || !fs::is_directory(run_dir)) {
      throw stagex::IoError(run_dir.string(), "cannot create run directory " + run_dir.string());
    }
    stagex::SaveRunConfig(rc, run_dir / "config.json");

    stagex::Model model(rc.model, rc.train.seed);
    stagex::FitOptions options;
    options.output_dir = run_dir;
    options.max_examples_per_epoch = rc.max_examples_per_epoch;
    if (resume) options.resume = stagex::LoadTrainState(model, run_dir / "last.state");
    LineSink sink(log, user);
    std::ostream stream(&sink);
    options.log = &stream;
    stagex::Fit(model, train, dev, rc.train, options);
    stream.flush();
  });
}

stagex_status stagex_model_load(const char *checkpoint_path, stagex_model **out) {
  return Guard([&] {
    Require(checkpoint_path && out, "stagex_model_load: null pointer");
    *out = new stagex_model{stagex::LoadCheckpoint(checkpoint_path)};
  });
}

int stagex_model_num_stages(const stagex_model *model) {
  return model ? model->value.num_stages() : 0;
}

stagex_status stagex_model_reference_mode(const stagex_model *model, int *out_use_utt,
                                          int *out_use_frame) {
  return Guard([&] {
    Require(model && out_use_utt && out_use_frame, "stagex_model_reference_mode: null pointer");
    *out_use_utt = model->value.config().use_utt ? 1 : 0;
    *out_use_frame = model->value.config().use_frame ? 1 : 0;
  });
}

stagex_status stagex_model_set_reference_mode(stagex_model *model, int use_utt, int use_frame) {
  return Guard([&] {
    Require(model, "stagex_model_set_reference_mode: null model");
    model->value.SetReferenceMode(use_utt != 0, use_frame != 0);
  });
}

stagex_status stagex_model_extract(const stagex_model *model, const double *mixture,
                                   size_t mixture_len, const double *reference,
                                   size_t reference_len, double *out) {
  return Guard([&] {
    Require(model && mixture && reference && out, "stagex_model_extract: null pointer");
    stagex::ag::NoGradGuard guard;
    stagex::PipelineOutput result = stagex::ForwardPipeline(
        model->value, Wave(mixture, mixture_len), Wave(reference, reference_len));
    const stagex::ag::Matrix &raw = result.final_stage().fused.value();
    if (static_cast<std::size_t>(raw.size()) != mixture_len) {
      throw stagex::NumericError("extraction produced the wrong length");
    }
    stagex::Waveform est(std::vector<double>(raw.data(), raw.data() + raw.size()));
    for (double x : est.samples) {
      if (!std::isfinite(x)) throw stagex::NumericError("extraction produced non-finite samples");
    }
    est = stagex::MatchPeak(est, Wave(mixture, mixture_len));
    std::copy(est.samples.begin(), est.samples.end(), out);
  });
}

void stagex_model_free(stagex_model *model) { delete model; }

stagex_status stagex_evaluate(const stagex_model *model, const char *manifest_path,
                              const char *split, const char *report_path, char **out_table,
                              int *out_failures, stagex_log_fn log, void *user) {
  return Guard([&] {
    Require(model && manifest_path, "stagex_evaluate: null pointer");
    stagex::Manifest manifest = stagex::LoadManifest(manifest_path);
    if (split && *split) manifest = manifest.Filter(stagex::ParseSplit(split));
    if (manifest.records.empty()) throw stagex::ArgumentError("manifest has no matching records");
    LineSink sink(log, user);
    std::ostream stream(&sink);
    stagex::Report report = stagex::Evaluate(model->value, manifest, &stream);
    stream.flush();
    if (report_path && *report_path) stagex::WriteReport(report, report_path);
    if (out_table) *out_table = CopyString(stagex::FormatReportTable(report));
    if (out_failures) *out_failures = report.failures;
  });
}

}  // extern "C"
