#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace retina {

enum class ErrorCode {
  NoIntersection,
  OffSphere,
  BoundaryNotFound,
  OutOfField,
  NoSolution,
  Unreachable,
  DegenerateApproach,
  OutOfJointRange,
  DegenerateGeometry,
  InvalidArgument,
  SceneInvalid,
  ImageUnreadable,
  NotFound,
  Conflict,
};

std::string_view to_string(ErrorCode code);

// Every failure the planner can signal carries a machine-readable code; the
// HTTP layer maps codes to status values.
class PlanningError : public std::runtime_error {
 public:
  PlanningError(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace retina
