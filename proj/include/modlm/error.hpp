// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_ERROR_HPP
#define MODLM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace modlm {

// Base class for all errors raised by the library. CLI maps subclasses to
// exit codes (ConfigError -> 2, everything else -> 3).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("ConfigError: " + msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error("DataError: " + msg) {}
};

class EmptyDocument : public DataError {
 public:
  explicit EmptyDocument(const std::string& msg)
      : DataError("EmptyDocument: " + msg) {}
};

class EmptyCorpus : public DataError {
 public:
  explicit EmptyCorpus(const std::string& msg)
      : DataError("EmptyCorpus: " + msg) {}
};

class DegenerateDistribution : public DataError {
 public:
  explicit DegenerateDistribution(const std::string& msg)
      : DataError("DegenerateDistribution: " + msg) {}
};

class DegenerateInput : public DataError {
 public:
  explicit DegenerateInput(const std::string& msg)
      : DataError("DegenerateInput: " + msg) {}
};

class InsufficientData : public DataError {
 public:
  explicit InsufficientData(const std::string& msg)
      : DataError("InsufficientData: " + msg) {}
};

class RoutingError : public DataError {
 public:
  explicit RoutingError(const std::string& msg)
      : DataError("RoutingError: " + msg) {}
};

class DecodeError : public DataError {
 public:
  explicit DecodeError(const std::string& msg)
      : DataError("DecodeError: " + msg) {}
};

class IoError : public DataError {
 public:
  explicit IoError(const std::string& msg) : DataError("IoError: " + msg) {}
};

}  // namespace modlm

#endif  // MODLM_ERROR_HPP
