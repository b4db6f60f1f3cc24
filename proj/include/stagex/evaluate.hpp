// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Test-set reports: mean SDRi / SI-SDRi per (condition, stage), with a stage-0
// row for the unprocessed mixture.

#ifndef STAGEX_EVALUATE_HPP_
#define STAGEX_EVALUATE_HPP_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stagex/dataset.hpp"
#include "stagex/multistage.hpp"

namespace stagex {

struct ExampleResult {
  std::size_t index = 0;  // position in the manifest or input span
  Condition condition = Condition::kClean;
  int speaker_id = 0;
  bool ok = true;
  std::string error;
  std::vector<Improvement> stages;  // [0] mixture baseline, [k] stage k
};

struct ReportRow {
  Condition condition = Condition::kClean;
  int stage = 0;  // 0 = mixture baseline
  std::string reference_mode;
  double mean_sdri = 0.0;
  double mean_si_sdri = 0.0;
  int count = 0;
  int failures = 0;
};

struct Report {
  int num_stages = 0;
  std::vector<ReportRow> rows;
  std::vector<ExampleResult> examples;
  int failures = 0;
};

// "Utt+Fm", "Utt" or "Fm" for stage k >= 2; "Ref" for stage 1.
std::string ReferenceMode(const ModelConfig &config, int stage);

ExampleResult EvaluateExample(const Model &model, const MixtureExample &example);

// Rows are ordered by first appearance of each condition, then by stage.
Report BuildReport(const Model &model, std::vector<ExampleResult> results);

Report Evaluate(const Model &model, std::span<const MixtureExample> examples);
// Examples that fail to load or evaluate are counted and left out of the means.
Report Evaluate(const Model &model, const Manifest &manifest, std::ostream *log = nullptr);

// One JSON object per line: rows ("kind": "row") then examples ("kind": "example").
void WriteReport(const Report &report, const std::filesystem::path &path);
std::string FormatReportTable(const Report &report);

}  // namespace stagex

#endif  // STAGEX_EVALUATE_HPP_
