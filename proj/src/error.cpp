#include "waypixel/error.hpp"

namespace waypixel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateLayout: return "DegenerateLayout";
    case ErrorCode::UnreachableRoute: return "UnreachableRoute";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::GoalNotInGraph: return "GoalNotInGraph";
    case ErrorCode::NoReachableNode: return "NoReachableNode";
    case ErrorCode::NoLocalizedFrame: return "NoLocalizedFrame";
    case ErrorCode::EmptySparseSet: return "EmptySparseSet";
    case ErrorCode::NoMatches: return "NoMatches";
    case ErrorCode::NoNavigableTarget: return "NoNavigableTarget";
    case ErrorCode::TaskInfeasible: return "TaskInfeasible";
  }
  return "Unknown";
}

}  // namespace waypixel
