// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "stagex/checkpoint.hpp"
#include "stagex/error.hpp"
#include "stagex/training.hpp"
#include "test_util.hpp"

using namespace stagex;

namespace {

std::string CorruptKey(const std::filesystem::path &path) {
  try {
    LoadCheckpoint(path);
  } catch (const CorruptArtifactError &e) {
    return e.key();
  }
  return "<loaded>";
}

}  // namespace

TEST_CASE("checkpoint round trip preserves parameters and the dev metric") {
  testutil::TempDir dir("ckpt");
  Model model(testutil::TinyModel(2, true), 4);
  auto dev = testutil::TinyExamples(3, 0.1, 5);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.segment_seconds = 0.05;
  Fit(model, testutil::TinyExamples(4), dev, cfg);

  SaveCheckpoint(model, dir / "m.ckpt", {{"note", "x"}});
  nlohmann::json meta;
  Model loaded = LoadCheckpoint(dir / "m.ckpt", &meta);
  CHECK(meta["note"] == "x");
  CHECK(ToJson(loaded.config()).dump() == ToJson(model.config()).dump());
  auto a = model.Snapshot(), b = loaded.Snapshot();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK(std::abs(MeanFinalSiSdri(model, dev) - MeanFinalSiSdri(loaded, dev)) < 1e-6);
}

TEST_CASE("corrupted checkpoints name the failing key") {
  testutil::TempDir dir("ckpt_bad");
  Model model(testutil::TinyModel(1, false), 4);
  SaveCheckpoint(model, dir / "good.ckpt");
  const std::string bytes = testutil::ReadBytes(dir / "good.ckpt");

  std::string flipped = bytes;
  const std::string name = "stage1.fusion.w2";
  const std::size_t at = flipped.find(name);
  REQUIRE(at != std::string::npos);
  flipped[at + name.size() + 16] ^= 0x40;  // first data byte after dtype, ndim, dims
  testutil::WriteBytes(dir / "flip.ckpt", flipped);
  CHECK(CorruptKey(dir / "flip.ckpt") == name);

  testutil::WriteBytes(dir / "short.ckpt", bytes.substr(0, bytes.size() - 7));
  CHECK(CorruptKey(dir / "short.ckpt") != "<loaded>");

  std::string magic = bytes;
  magic[0] = 'X';
  testutil::WriteBytes(dir / "magic.ckpt", magic);
  CHECK(CorruptKey(dir / "magic.ckpt") == "magic");

  std::string meta = bytes;
  meta[20] ^= 0x01;
  testutil::WriteBytes(dir / "meta.ckpt", meta);
  CHECK(CorruptKey(dir / "meta.ckpt") == "meta");

  CHECK_THROWS_AS(LoadCheckpoint(dir / "absent.ckpt"), IoError);
}

TEST_CASE("containers keep float64 tensors exactly") {
  testutil::TempDir dir("container");
  Container c;
  c.meta = {{"k", 1}};
  ag::Matrix m(2, 3);
  m << 1.0 / 3.0, -2.5e-300, 7, 0, 1e300, -0.1;
  c.tensors.push_back({"a/b", DType::kFloat64, m});
  WriteContainer(c, dir / "c.bin");
  Container back = ReadContainer(dir / "c.bin");
  CHECK(back.meta == c.meta);
  CHECK(back.Get("a/b").value == m);
  CHECK_THROWS_AS(back.Get("missing"), CorruptArtifactError);
}
