#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ultrarecon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// No tree can satisfy the requested generation constraints.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Malformed Newick (or other textual) input.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A reconstruction step could not produce a consistent answer. Carries the
/// chain of steps that were active when the failure happened.
class ReconstructionFailure : public Error {
 public:
  ReconstructionFailure(std::string stage, const std::string& detail)
      : Error(stage + ": " + detail), stage_(std::move(stage)), detail_(detail) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }
  const std::vector<std::string>& trace() const noexcept { return trace_; }
  void push_frame(std::string frame) { trace_.push_back(std::move(frame)); }

 private:
  std::string stage_;
  std::string detail_;
  std::vector<std::string> trace_;
};

/// A probability estimate fell outside the range a height formula can invert.
class EstimationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace ultrarecon
