#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridtune {

enum class Errc {
  DuplicateId,
  EmptyTopology,
  SaturatedNode,
  PastEvent,
  UnknownAgent,
  TimeRegression,
  UnknownConsumer,
  EmptyInput,
  ForeignNode,
  ForeignResource,
  JobNotRunning,
  NodeCapacityExceeded,
  NotTunable,
  UnmanagedJob,
  TargetUnavailable,
  ParseError,
  ValidationError,
  UnknownScenario,
  MissingJob,
  IoError,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::EmptyTopology: return "EmptyTopology";
    case Errc::SaturatedNode: return "SaturatedNode";
    case Errc::PastEvent: return "PastEvent";
    case Errc::UnknownAgent: return "UnknownAgent";
    case Errc::TimeRegression: return "TimeRegression";
    case Errc::UnknownConsumer: return "UnknownConsumer";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ForeignNode: return "ForeignNode";
    case Errc::ForeignResource: return "ForeignResource";
    case Errc::JobNotRunning: return "JobNotRunning";
    case Errc::NodeCapacityExceeded: return "NodeCapacityExceeded";
    case Errc::NotTunable: return "NotTunable";
    case Errc::UnmanagedJob: return "UnmanagedJob";
    case Errc::TargetUnavailable: return "TargetUnavailable";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::UnknownScenario: return "UnknownScenario";
    case Errc::MissingJob: return "MissingJob";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library carries a code so callers (and the CLI
// exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Config parse failure with a 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(Errc::ParseError, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Config validation failure naming the offending key path (e.g. "jobs[0].serial_fraction").
class ValidationError : public Error {
 public:
  ValidationError(std::string path, const std::string& message)
      : Error(Errc::ValidationError, path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace gridtune
