#pragma once

#include <stdexcept>
#include <string>

namespace strata {

/// Base class for all library errors. CLI maps these to one-line
/// machine-parseable diagnostics of the form "error: <kind>: <message>".
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

private:
  std::string kind_;
};

/// Tensor shapes do not conform.
struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

/// A configuration value is invalid (bad group count, bad key, ...).
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

/// An operation received an empty or degenerate input.
struct DegenerateInputError : Error {
  explicit DegenerateInputError(const std::string& m) : Error("degenerate-input", m) {}
};

/// On-disk data is malformed (bad magic, truncation, non-finite values).
struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format", m) {}
};

/// Input data violates a contract (unknown class label, bad extent, ...).
struct DataError : Error {
  explicit DataError(const std::string& m) : Error("data", m) {}
};

/// A statistic is undefined on this input (zero variance, empty classes).
struct UndefinedError : Error {
  explicit UndefinedError(const std::string& m) : Error("undefined", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

} // namespace strata
