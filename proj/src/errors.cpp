#include "retina/errors.hpp"

namespace retina {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoIntersection: return "no_intersection";
    case ErrorCode::OffSphere: return "off_sphere";
    case ErrorCode::BoundaryNotFound: return "boundary_not_found";
    case ErrorCode::OutOfField: return "out_of_field";
    case ErrorCode::NoSolution: return "no_solution";
    case ErrorCode::Unreachable: return "unreachable";
    case ErrorCode::DegenerateApproach: return "degenerate_approach";
    case ErrorCode::OutOfJointRange: return "out_of_joint_range";
    case ErrorCode::DegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::SceneInvalid: return "scene_invalid";
    case ErrorCode::ImageUnreadable: return "image_unreadable";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Conflict: return "conflict";
  }
  return "unknown";
}

}  // namespace retina
