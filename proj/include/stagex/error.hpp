// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef STAGEX_ERROR_HPP_
#define STAGEX_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace stagex {

// Precondition violations on in-memory arguments (length mismatch, bad label...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unsupported file contents. `field()` names the offending
// header field (e.g. "sample_rate", "channels").
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string field, const std::string &what)
      : std::runtime_error(what), field_(std::move(field)) {}
  const std::string &field() const { return field_; }

 private:
  std::string field_;
};

// Unreadable / unwritable paths.
class IoError : public std::runtime_error {
 public:
  IoError(std::string path, const std::string &what)
      : std::runtime_error(what), path_(std::move(path)) {}
  const std::string &path() const { return path_; }

 private:
  std::string path_;
};

// Bad configuration files or inconsistent option combinations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN / Inf encountered during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint or state file fails structural or checksum validation.
// `key()` is the tensor or metadata key being read when it failed.
class CorruptArtifactError : public std::runtime_error {
 public:
  CorruptArtifactError(std::string key, const std::string &what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string &key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace stagex

#endif  // STAGEX_ERROR_HPP_
