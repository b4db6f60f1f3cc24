// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "stagex/error.hpp"

namespace stagex {

namespace {

constexpr double kPcmScale = 32768.0;

std::uint32_t ReadU32(const unsigned char *p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t ReadU16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU16(std::string &out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

[[noreturn]] void Bad(const std::filesystem::path &path, const std::string &field,
                      const std::string &msg) {
  throw FormatError(field, path.string() + ": " + field + ": " + msg);
}

}  // namespace

Waveform LoadWav(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0) {
    Bad(path, "riff", "missing RIFF header");
  }
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    Bad(path, "wave", "missing WAVE tag");
  }

  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    std::uint32_t size = ReadU32(chunk + 4);
    std::size_t body = pos + 8;
    if (body + size > bytes.size()) Bad(path, "chunk_size", "truncated chunk");

    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) Bad(path, "fmt", "fmt chunk too short");
      const unsigned char *f = bytes.data() + body;
      if (ReadU16(f) != 1) Bad(path, "audio_format", "expected PCM (1)");
      std::uint16_t channels = ReadU16(f + 2);
      if (channels != 1) {
        Bad(path, "channels", "expected mono, got " + std::to_string(channels));
      }
      std::uint32_t rate = ReadU32(f + 4);
      if (rate != static_cast<std::uint32_t>(kSampleRate)) {
        Bad(path, "sample_rate",
            "expected " + std::to_string(kSampleRate) + " Hz, got " +
                std::to_string(rate));
      }
      std::uint16_t bits = ReadU16(f + 14);
      if (bits != 16) {
        Bad(path, "bits_per_sample", "expected 16, got " + std::to_string(bits));
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) Bad(path, "fmt", "data chunk before fmt chunk");
      Waveform w;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        auto v = static_cast<std::int16_t>(ReadU16(bytes.data() + body + 2 * i));
        w.samples[i] = v / kPcmScale;
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
  Bad(path, have_fmt ? "data" : "fmt", "chunk not found");
}

void SaveWav(const Waveform &wave, const std::filesystem::path &path) {
  wave.Validate();
  if (wave.sample_rate != kSampleRate) {
    throw FormatError("sample_rate", "save_wav: only " +
                                         std::to_string(kSampleRate) +
                                         " Hz is supported");
  }
  const auto data_bytes = static_cast<std::uint32_t>(wave.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  PutU32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, 1);
  PutU16(out, 1);
  PutU32(out, kSampleRate);
  PutU32(out, kSampleRate * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  out += "data";
  PutU32(out, data_bytes);
  for (double x : wave.samples) {
    double q = std::round(x * kPcmScale);
    q = std::clamp(q, -32768.0, 32767.0);
    PutU16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path.string(), "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(path.string(), "write failed: " + path.string());
}

}  // namespace stagex
