#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vedsa {

// Failure categories. The CLI maps each one to its own exit code.
enum class ErrorKind {
  Config,      // invalid thresholds, windows, shapes in a config record
  Domain,      // input outside an operation's domain
  Structural,  // shape or architecture mismatch
  Numeric,     // NaN/Inf produced during a forward pass or training
  Parse,       // malformed dataset or interchange record
  Io,          // missing/unwritable file
  Usage,       // API misuse (e.g. backward before forward)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& w) : Error(ErrorKind::Domain, w) {}
};

class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& w) : Error(ErrorKind::Structural, w) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& w) : Error(ErrorKind::Numeric, w) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& w) : Error(ErrorKind::Usage, w) {}
};

/// Recoverable: parsers report it and skip the offending record.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& w)
      : Error(ErrorKind::Parse, source + ":" + std::to_string(line) + ": " + w), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Structural: return "structural";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

}  // namespace vedsa
