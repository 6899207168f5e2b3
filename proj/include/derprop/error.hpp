#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace derprop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DimensionUnderflowError : public Error {
 public:
  using Error::Error;
};

class DegenerateColumnError : public Error {
 public:
  DegenerateColumnError(std::size_t column, const std::string& msg) : Error(msg), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

class ZeroVectorError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Raised by the DPT reader/writer and the PGM exporter.
class FormatError : public Error {
 public:
  enum class Kind { kBadMagic, kUnsupportedVersion, kUnsupportedDtype, kBadReserved, kBadRank, kTruncatedHeader, kTruncatedPayload, kTrailingBytes, kIo, kInvalidArgument };

  FormatError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace derprop
