#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ksprune {

/// Base of every error the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad manifest, flag, or parameter combination. The CLI maps this to exit 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unknown dataset id or out-of-range row index.
class LookupError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A malformed input row, with enough location to find it.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, std::string reason)
      : Error(file + ":" + std::to_string(line) + ": " + reason),
        file_(std::move(file)),
        line_(line),
        reason_(std::move(reason)) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string reason_;
};

/// Network or service failure that may succeed on retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Two artifacts that should describe the same data do not.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace ksprune
