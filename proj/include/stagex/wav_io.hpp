// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef STAGEX_WAV_IO_HPP_
#define STAGEX_WAV_IO_HPP_

#include <filesystem>

#include "stagex/signal.hpp"

namespace stagex {

// Only RIFF / PCM16 / mono / 8000 Hz is accepted. Anything else raises
// FormatError naming the offending header field.
Waveform LoadWav(const std::filesystem::path &path);

// Writes RIFF PCM16 mono 8000 Hz. Samples are clipped to [-1, 1) and rounded
// to the nearest multiple of 1/32768.
void SaveWav(const Waveform &wave, const std::filesystem::path &path);

}  // namespace stagex

#endif  // STAGEX_WAV_IO_HPP_
