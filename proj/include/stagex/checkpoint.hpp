// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Binary tensor container used for model checkpoints and training state.
//
// Layout (all integers little-endian uint32):
//
//   "STGXCKPT"                         8-byte magic
//   version                            currently 1
//   meta_len, meta[meta_len]           UTF-8 JSON object
//   meta_crc                           CRC-32 of meta bytes
//   tensor_count
//   tensor_count times:
//     name_len, name[name_len]         UTF-8 parameter path
//     dtype                            0 = float32, 1 = float64
//     ndim, dims[ndim]                 row-major shape
//     data                             prod(dims) little-endian values
//     crc                              CRC-32 of name + dtype + ndim + dims + data
//
// Checkpoints store "model_config" in meta and every parameter as float32
// under the names listed by Model::parameters().

#ifndef STAGEX_CHECKPOINT_HPP_
#define STAGEX_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "stagex/autograd.hpp"
#include "stagex/multistage.hpp"

namespace stagex {

enum class DType : std::uint32_t { kFloat32 = 0, kFloat64 = 1 };

struct TensorRecord {
  std::string name;
  DType dtype = DType::kFloat32;
  ag::Matrix value;  // 2-D; stored row-major
};

struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<TensorRecord> tensors;

  const TensorRecord &Get(const std::string &name) const;  // CorruptArtifactError
};

void WriteContainer(const Container &container, const std::filesystem::path &path);
// Throws CorruptArtifactError naming the key being read on any structural or
// checksum failure, IoError if the file cannot be opened.
Container ReadContainer(const std::filesystem::path &path);

void SaveCheckpoint(const Model &model, const std::filesystem::path &path,
                    const nlohmann::json &extra_meta = nlohmann::json::object());
// Rebuilds the model from the stored config and loads every parameter.
Model LoadCheckpoint(const std::filesystem::path &path, nlohmann::json *meta_out = nullptr);

// Rounds every parameter to the nearest float32 value.
void RoundParametersToFloat(Model &model);

}  // namespace stagex

#endif  // STAGEX_CHECKPOINT_HPP_
