// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "stagex/error.hpp"

namespace stagex {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'T', 'G', 'X', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxName = 4096;

class Writer {
 public:
  void Bytes(const void *p, std::size_t n) {
    buf_.append(static_cast<const char *>(p), n);
  }
  void U32(std::uint32_t v) { Bytes(&v, 4); }
  std::size_t size() const { return buf_.size(); }
  std::uint32_t CrcFrom(std::size_t begin) const {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef *>(buf_.data() + begin),
              static_cast<uInt>(buf_.size() - begin)));
  }
  const std::string &data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : buf_(std::move(data)) {}
  void Bytes(void *out, std::size_t n, const std::string &key) {
    if (pos_ + n > buf_.size()) throw CorruptArtifactError(key, "checkpoint truncated while reading '" + key + "'");
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t U32(const std::string &key) {
    std::uint32_t v;
    Bytes(&v, 4, key);
    return v;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == buf_.size(); }
  std::uint32_t CrcRange(std::size_t begin, std::size_t end) const {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef *>(buf_.data() + begin),
              static_cast<uInt>(end - begin)));
  }

 private:
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace

const TensorRecord &Container::Get(const std::string &name) const {
  for (const auto &t : tensors) {
    if (t.name == name) return t;
  }
  throw CorruptArtifactError(name, "checkpoint is missing tensor '" + name + "'");
}

void WriteContainer(const Container &container, const fs::path &path) {
  Writer w;
  w.Bytes(kMagic, sizeof(kMagic));
  w.U32(kVersion);
  const std::string meta = container.meta.dump();
  w.U32(static_cast<std::uint32_t>(meta.size()));
  std::size_t mstart = w.size();
  w.Bytes(meta.data(), meta.size());
  w.U32(w.CrcFrom(mstart));
  w.U32(static_cast<std::uint32_t>(container.tensors.size()));
  for (const auto &t : container.tensors) {
    w.U32(static_cast<std::uint32_t>(t.name.size()));
    std::size_t start = w.size();
    w.Bytes(t.name.data(), t.name.size());
    w.U32(static_cast<std::uint32_t>(t.dtype));
    w.U32(2);
    w.U32(static_cast<std::uint32_t>(t.value.rows()));
    w.U32(static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
        if (t.dtype == DType::kFloat32) {
          float f = static_cast<float>(t.value(r, c));
          w.Bytes(&f, 4);
        } else {
          double d = t.value(r, c);
          w.Bytes(&d, 8);
        }
      }
    }
    w.U32(w.CrcFrom(start));
  }
  // Write-then-rename so an interrupted save never leaves a torn file.
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string(), "cannot write " + tmp.string());
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    if (!out) throw IoError(tmp.string(), "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(path.string(), "cannot rename onto " + path.string() + ": " + ec.message());
}

Container ReadContainer(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open " + path.string());
  Reader r(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));

  char magic[8];
  r.Bytes(magic, 8, "magic");
  if (std::memcmp(magic, kMagic, 8) != 0) throw CorruptArtifactError("magic", "not a checkpoint file: bad magic");
  std::uint32_t version = r.U32("version");
  if (version != kVersion) {
    throw CorruptArtifactError("version", "unsupported checkpoint version " + std::to_string(version));
  }
  Container c;
  std::uint32_t mlen = r.U32("meta");
  std::size_t mstart = r.pos();
  std::string meta(mlen, '\0');
  r.Bytes(meta.data(), mlen, "meta");
  if (r.U32("meta") != r.CrcRange(mstart, mstart + mlen)) {
    throw CorruptArtifactError("meta", "checkpoint metadata checksum mismatch");
  }
  try {
    c.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception &e) {
    throw CorruptArtifactError("meta", std::string("checkpoint metadata unreadable: ") + e.what());
  }

  std::uint32_t count = r.U32("tensor_count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string idx = "tensor#" + std::to_string(i);
    std::uint32_t nlen = r.U32(idx);
    if (nlen > kMaxName) throw CorruptArtifactError(idx, "implausible tensor name length");
    std::size_t start = r.pos();
    TensorRecord t;
    t.name.resize(nlen);
    r.Bytes(t.name.data(), nlen, idx);
    std::uint32_t dtype = r.U32(t.name);
    if (dtype > 1) throw CorruptArtifactError(t.name, "tensor '" + t.name + "' has unknown dtype");
    t.dtype = static_cast<DType>(dtype);
    std::uint32_t ndim = r.U32(t.name);
    if (ndim != 2) throw CorruptArtifactError(t.name, "tensor '" + t.name + "' is not 2-D");
    std::uint32_t rows = r.U32(t.name);
    std::uint32_t cols = r.U32(t.name);
    const std::size_t width = t.dtype == DType::kFloat32 ? 4 : 8;
    if (static_cast<std::uint64_t>(rows) * cols * width > (1ULL << 34)) {
      throw CorruptArtifactError(t.name, "tensor '" + t.name + "' has implausible shape");
    }
    t.value.resize(rows, cols);
    for (std::uint32_t a = 0; a < rows; ++a) {
      for (std::uint32_t b = 0; b < cols; ++b) {
        if (t.dtype == DType::kFloat32) {
          float f;
          r.Bytes(&f, 4, t.name);
          t.value(a, b) = f;
        } else {
          double d;
          r.Bytes(&d, 8, t.name);
          t.value(a, b) = d;
        }
      }
    }
    std::size_t end = r.pos();
    if (r.U32(t.name) != r.CrcRange(start, end)) {
      throw CorruptArtifactError(t.name, "checksum mismatch in tensor '" + t.name + "'");
    }
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw CorruptArtifactError("trailer", "unexpected bytes after the last tensor");
  return c;
}

void SaveCheckpoint(const Model &model, const fs::path &path, const nlohmann::json &extra_meta) {
  Container c;
  c.meta["format"] = "stagex-checkpoint";
  c.meta["model_config"] = ToJson(model.config());
  for (const auto &[k, v] : extra_meta.items()) c.meta[k] = v;
  for (const auto &[name, var] : model.parameters().items()) {
    c.tensors.push_back({name, DType::kFloat32, var.value()});
  }
  WriteContainer(c, path);
}

Model LoadCheckpoint(const fs::path &path, nlohmann::json *meta_out) {
  Container c = ReadContainer(path);
  if (!c.meta.contains("model_config")) {
    throw CorruptArtifactError("model_config", "checkpoint has no model_config");
  }
  ModelConfig cfg;
  try {
    cfg = ModelConfigFromJson(c.meta.at("model_config"));
    cfg.Validate();
  } catch (const ConfigError &e) {
    throw CorruptArtifactError("model_config", std::string("checkpoint model_config invalid: ") + e.what());
  }
  Model model(cfg, 0);
  for (const auto &[name, var] : model.parameters().items()) {
    const TensorRecord &t = c.Get(name);
    if (t.value.rows() != var.rows() || t.value.cols() != var.cols()) {
      throw CorruptArtifactError(name, "tensor '" + name + "' has shape " +
                                           std::to_string(t.value.rows()) + "x" +
                                           std::to_string(t.value.cols()) + ", expected " +
                                           std::to_string(var.rows()) + "x" +
                                           std::to_string(var.cols()));
    }
    ag::Var target = var;
    target.mutable_value() = t.value;
  }
  if (c.tensors.size() != model.parameters().size()) {
    for (const auto &t : c.tensors) {
      if (!model.parameters().Contains(t.name)) {
        throw CorruptArtifactError(t.name, "unexpected tensor '" + t.name + "' in checkpoint");
      }
    }
  }
  if (meta_out) *meta_out = c.meta;
  return model;
}

void RoundParametersToFloat(Model &model) {
  for (const auto &item : model.parameters().items()) {
    ag::Var v = item.second;
    v.mutable_value() = v.value().cast<float>().cast<double>();
  }
}

}  // namespace stagex
