#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace probe {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or unusable configuration (data files, endpoint settings).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Well-formed input whose content violates a data contract.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

class JoinError : public Error {
 public:
  using Error::Error;
};

class DispatchError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace probe
