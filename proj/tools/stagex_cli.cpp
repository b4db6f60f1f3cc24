// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// stagex command-line front end. Talks to the library only through stagex.h.
//
//   stagex gen-data  [--config FILE] [--<key> VALUE ...]
//   stagex train     [--config FILE] [--resume] [--<key> VALUE ...]
//   stagex extract   --checkpoint CKPT --mixture MIX.wav --reference REF.wav --out OUT.wav
//   stagex evaluate  --checkpoint CKPT --manifest MANIFEST [--split test]
//                    [--report REPORT.jsonl] [--use-utt B] [--use-frame B]

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stagex.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCorrupt = 4;

int ExitCode(stagex_status s) {
  switch (s) {
    case STAGEX_OK: return kExitOk;
    case STAGEX_ERR_NUMERIC: return kExitNumeric;
    case STAGEX_ERR_CORRUPT: return kExitCorrupt;
    default: return kExitUsage;
  }
}

int Report(stagex_status s) {
  if (s != STAGEX_OK) {
    std::cerr << "stagex: " << stagex_status_name(s) << " error: " << stagex_last_error() << '\n';
  }
  return ExitCode(s);
}

struct Owned {
  char *ptr = nullptr;
  ~Owned() { stagex_free(ptr); }
};

struct ConfigDeleter {
  void operator()(stagex_config *c) const { stagex_config_free(c); }
};
using ConfigPtr = std::unique_ptr<stagex_config, ConfigDeleter>;

struct ModelDeleter {
  void operator()(stagex_model *m) const { stagex_model_free(m); }
};
using ModelPtr = std::unique_ptr<stagex_model, ModelDeleter>;

std::vector<std::string> ConfigKeys() {
  Owned keys;
  if (stagex_config_keys(&keys.ptr) != STAGEX_OK) return {};
  std::vector<std::string> out;
  std::istringstream in(keys.ptr);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string Kebab(std::string key) {
  for (char &c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

// --config plus one --<key> flag per configuration key.
struct ConfigOptions {
  std::string path;
  std::map<std::string, std::string> values;
  std::vector<std::string> order;

  void Register(CLI::App *cmd) {
    cmd->add_option("--config", path, "JSON run configuration");
    for (const std::string &key : ConfigKeys()) {
      order.push_back(key);
      cmd->add_option("--" + Kebab(key), values[key], "override '" + key + "'");
    }
  }

  stagex_status Build(ConfigPtr &out, CLI::App *cmd) {
    stagex_config *raw = nullptr;
    stagex_status s = path.empty() ? stagex_config_default(&raw)
                                   : stagex_config_load(path.c_str(), &raw);
    if (s != STAGEX_OK) return s;
    out.reset(raw);
    for (const std::string &key : order) {
      if (cmd->count("--" + Kebab(key)) == 0) continue;
      s = stagex_config_set(out.get(), key.c_str(), values[key].c_str());
      if (s != STAGEX_OK) return s;
    }
    return STAGEX_OK;
  }
};

void PrintLine(const char *line, void *) {
  std::cout << line << '\n';
  std::cout.flush();
}

void PrintError(const char *line, void *) { std::cerr << line << '\n'; }

int CmdGenData(ConfigOptions &opts, CLI::App *cmd) {
  ConfigPtr config;
  if (stagex_status s = opts.Build(config, cmd); s != STAGEX_OK) return Report(s);
  int up_to_date = 0;
  Owned summary;
  stagex_status s = stagex_gen_data(config.get(), &up_to_date, &summary.ptr);
  if (s == STAGEX_OK) std::cout << summary.ptr;
  return Report(s);
}

int CmdTrain(ConfigOptions &opts, CLI::App *cmd, bool resume) {
  ConfigPtr config;
  if (stagex_status s = opts.Build(config, cmd); s != STAGEX_OK) return Report(s);
  stagex_status s = stagex_train(config.get(), resume ? 1 : 0, PrintLine, nullptr);
  if (s == STAGEX_OK) {
    Owned dir;
    if (stagex_config_get(config.get(), "run_dir", &dir.ptr) == STAGEX_OK) {
      std::string path = dir.ptr;  // JSON string literal
      if (path.size() >= 2) path = path.substr(1, path.size() - 2);
      std::cout << "best checkpoint: " << path << "/best.ckpt\n";
    }
  }
  return Report(s);
}

int CmdExtract(const std::string &ckpt, const std::string &mix_path, const std::string &ref_path,
               const std::string &out_path) {
  stagex_model *raw = nullptr;
  if (stagex_status s = stagex_model_load(ckpt.c_str(), &raw); s != STAGEX_OK) return Report(s);
  ModelPtr model(raw);

  double *mix = nullptr, *ref = nullptr;
  size_t mix_len = 0, ref_len = 0;
  stagex_status s = stagex_wav_read(mix_path.c_str(), &mix, &mix_len);
  if (s == STAGEX_OK) s = stagex_wav_read(ref_path.c_str(), &ref, &ref_len);
  std::vector<double> out(mix_len);
  if (s == STAGEX_OK) s = stagex_model_extract(model.get(), mix, mix_len, ref, ref_len, out.data());
  if (s == STAGEX_OK) s = stagex_wav_write(out_path.c_str(), out.data(), out.size());
  stagex_free(mix);
  stagex_free(ref);
  if (s == STAGEX_OK) {
    std::cout << "wrote " << out_path << " (" << out.size() << " samples, "
              << stagex_model_num_stages(model.get()) << " stages)\n";
  }
  return Report(s);
}

int CmdEvaluate(const std::string &ckpt, const std::string &manifest, const std::string &split,
                const std::string &report, std::optional<bool> use_utt,
                std::optional<bool> use_frame) {
  stagex_model *raw = nullptr;
  if (stagex_status s = stagex_model_load(ckpt.c_str(), &raw); s != STAGEX_OK) return Report(s);
  ModelPtr model(raw);
  if (use_utt || use_frame) {
    int utt = 1, frame = 0;
    if (stagex_status s = stagex_model_reference_mode(model.get(), &utt, &frame); s != STAGEX_OK) {
      return Report(s);
    }
    if (use_utt) utt = *use_utt;
    if (use_frame) frame = *use_frame;
    if (stagex_status s = stagex_model_set_reference_mode(model.get(), utt, frame); s != STAGEX_OK) {
      return Report(s);
    }
  }
  Owned table;
  int failures = 0;
  stagex_status s = stagex_evaluate(model.get(), manifest.c_str(), split.c_str(), report.c_str(),
                                    &table.ptr, &failures, PrintError, nullptr);
  if (s == STAGEX_OK) {
    std::cout << table.ptr;
    if (failures > 0) std::cout << failures << " example(s) failed and were excluded\n";
    if (!report.empty()) std::cout << "report: " << report << '\n';
  }
  return Report(s);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"stagex: multi-stage target speaker extraction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(stagex_version()));

  ConfigOptions gen_opts, train_opts;
  CLI::App *gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
  gen_opts.Register(gen);

  CLI::App *train = app.add_subcommand("train", "train a model");
  train_opts.Register(train);
  bool resume = false;
  train->add_flag("--resume", resume, "continue from run_dir/last.state");

  CLI::App *extract = app.add_subcommand("extract", "extract the target speaker from a mixture");
  std::string ckpt, mix, ref, out;
  extract->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  extract->add_option("--mixture", mix, "mixture WAV")->required();
  extract->add_option("--reference", ref, "reference WAV of the target speaker")->required();
  extract->add_option("--out", out, "output WAV")->required();

  CLI::App *evaluate = app.add_subcommand("evaluate", "report SDRi / SI-SDRi per condition and stage");
  std::string eval_ckpt, manifest, split = "test", report;
  std::optional<bool> use_utt, use_frame;
  evaluate->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  evaluate->add_option("--manifest", manifest, "manifest.jsonl")->required();
  evaluate->add_option("--split", split, "split to evaluate (empty = all)")->capture_default_str();
  evaluate->add_option("--report", report, "line-delimited JSON report path");
  evaluate->add_option("--use-utt", use_utt, "refined utterance embedding at stages >= 2");
  evaluate->add_option("--use-frame", use_frame, "frame-level reference at stages >= 2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*gen) return CmdGenData(gen_opts, gen);
  if (*train) return CmdTrain(train_opts, train, resume);
  if (*extract) return CmdExtract(ckpt, mix, ref, out);
  if (*evaluate) return CmdEvaluate(eval_ckpt, manifest, split, report, use_utt, use_frame);
  return kExitUsage;
}
