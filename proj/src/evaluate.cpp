// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "stagex/error.hpp"

namespace stagex {

std::string ReferenceMode(const ModelConfig &config, int stage) {
  if (stage <= 0) return "Mixture";
  if (stage == 1) return "Ref";
  if (config.use_utt && config.use_frame) return "Utt+Fm";
  if (config.use_frame) return "Fm";
  return "Utt";
}

ExampleResult EvaluateExample(const Model &model, const MixtureExample &example) {
  ExampleResult r;
  r.condition = example.condition;
  r.speaker_id = example.speaker_id;
  try {
    ag::NoGradGuard guard;
    Improvement base = ComputeImprovement(example.mixture, example.mixture, example.target);
    r.stages.push_back(base);
    PipelineOutput out = ForwardPipeline(model, example.mixture, example.reference);
    for (const StageOutput &st : out.stages) {
      Waveform est = MatchPeak(ToWaveform(st.fused), example.mixture);
      Improvement imp = ComputeImprovement(est, example.mixture, example.target);
      if (!std::isfinite(imp.sdri) || !std::isfinite(imp.si_sdri)) {
        throw NumericError("non-finite metric");
      }
      r.stages.push_back(imp);
    }
  } catch (const std::exception &e) {
    r.ok = false;
    r.error = e.what();
    r.stages.clear();
    return r;
  }
  return r;
}

Report BuildReport(const Model &model, std::vector<ExampleResult> results) {
  Report report;
  report.num_stages = model.num_stages();
  std::vector<Condition> order;
  for (const ExampleResult &r : results) {
    bool seen = false;
    for (Condition c : order) seen = seen || c == r.condition;
    if (!seen) order.push_back(r.condition);
    if (!r.ok) ++report.failures;
  }
  for (Condition c : order) {
    for (int k = 0; k <= report.num_stages; ++k) {
      ReportRow row;
      row.condition = c;
      row.stage = k;
      row.reference_mode = ReferenceMode(model.config(), k);
      double sdri = 0.0, si = 0.0;
      for (const ExampleResult &r : results) {
        if (r.condition != c) continue;
        if (!r.ok) {
          ++row.failures;
          continue;
        }
        sdri += r.stages[static_cast<std::size_t>(k)].sdri;
        si += r.stages[static_cast<std::size_t>(k)].si_sdri;
        ++row.count;
      }
      if (row.count > 0) {
        row.mean_sdri = sdri / row.count;
        row.mean_si_sdri = si / row.count;
      } else {
        row.mean_sdri = row.mean_si_sdri = std::numeric_limits<double>::quiet_NaN();
      }
      report.rows.push_back(row);
    }
  }
  report.examples = std::move(results);
  return report;
}

Report Evaluate(const Model &model, std::span<const MixtureExample> examples) {
  std::vector<ExampleResult> results;
  results.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    results.push_back(EvaluateExample(model, examples[i]));
    results.back().index = i;
  }
  return BuildReport(model, std::move(results));
}

Report Evaluate(const Model &model, const Manifest &manifest, std::ostream *log) {
  std::vector<ExampleResult> results;
  results.reserve(manifest.records.size());
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const ManifestRecord &rec = manifest.records[i];
    ExampleResult r;
    try {
      r = EvaluateExample(model, LoadExample(manifest, rec));
    } catch (const std::exception &e) {
      r.ok = false;
      r.error = e.what();
      r.condition = rec.condition;
      r.speaker_id = rec.speaker_id;
    }
    r.index = i;
    if (!r.ok && log) *log << "example " << i << " (" << rec.mixture_path << ") failed: " << r.error << '\n';
    results.push_back(std::move(r));
  }
  return BuildReport(model, std::move(results));
}

namespace {

nlohmann::json Num(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

}  // namespace

void WriteReport(const Report &report, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write " + path.string());
  for (const ReportRow &row : report.rows) {
    nlohmann::ordered_json j;
    j["kind"] = "row";
    j["condition"] = ToString(row.condition);
    j["stage"] = row.stage;
    j["num_stages"] = report.num_stages;
    j["reference_mode"] = row.reference_mode;
    j["mean_sdri"] = Num(row.mean_sdri);
    j["mean_si_sdri"] = Num(row.mean_si_sdri);
    j["count"] = row.count;
    j["failures"] = row.failures;
    out << j.dump() << '\n';
  }
  for (const ExampleResult &r : report.examples) {
    nlohmann::ordered_json j;
    j["kind"] = "example";
    j["index"] = r.index;
    j["condition"] = ToString(r.condition);
    j["speaker_id"] = r.speaker_id;
    j["ok"] = r.ok;
    if (!r.ok) j["error"] = r.error;
    nlohmann::ordered_json sdri = nlohmann::ordered_json::array();
    nlohmann::ordered_json si = nlohmann::ordered_json::array();
    for (const Improvement &imp : r.stages) {
      sdri.push_back(imp.sdri);
      si.push_back(imp.si_sdri);
    }
    j["sdri"] = sdri;
    j["si_sdri"] = si;
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
  if (!out) throw IoError(path.string(), "write failed: " + path.string());
}

std::string FormatReportTable(const Report &report) {
  std::string s;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %5s %-8s %9s %9s %6s %6s\n", "condition", "stage",
                "ref", "SDRi", "SI-SDRi", "count", "failed");
  s += line;
  for (const ReportRow &row : report.rows) {
    std::snprintf(line, sizeof(line), "%-14s %5d %-8s %9.3f %9.3f %6d %6d\n",
                  ToString(row.condition).c_str(), row.stage, row.reference_mode.c_str(),
                  row.mean_sdri, row.mean_si_sdri, row.count, row.failures);
    s += line;
  }
  return s;
}

}  // namespace stagex
