#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace waypixel {

enum class ErrorCode {
  MalformedFile,
  SchemaViolation,
  InvariantViolation,
  IoFailure,
  InvalidArgument,
  DegenerateLayout,
  UnreachableRoute,
  EmptyGraph,
  GoalNotInGraph,
  NoReachableNode,
  NoLocalizedFrame,
  EmptySparseSet,
  NoMatches,
  NoNavigableTarget,
  TaskInfeasible,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the engine carries one of the codes above so that
/// callers (the harness fallback chain, the CLI) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace waypixel
