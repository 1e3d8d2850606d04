#pragma once

#include "retina/geometry.hpp"

namespace retina {

struct EyeTiltProposal {
  double alpha_deg = 0.0;  // about eye X
  double beta_deg = 0.0;   // about eye Y
  bool clamped = false;
  SphericalPoint fov_center_after;  // visible-area centre for the (clamped) tilt
  double residual_mm = 0.0;         // geodesic miss between that centre and the target
};

/// Visible-area centre after tilting the eye by (alpha, beta):
/// roty(-2 beta) rotx(-2 alpha) [0, 0, -r].
Vec3 fov_center_vector(double alpha_deg, double beta_deg, const EyeModel& eye);
SphericalPoint fov_center_after_tilt(double alpha_deg, double beta_deg, const EyeModel& eye);

/// Eye tilt that brings the visible-area centre onto `target`, clamped per
/// axis to eye.tilt_limit_deg. Throws Unreachable when the beta equation has
/// no real solution.
EyeTiltProposal solve_eye_tilt(const Vec3& target, const EyeModel& eye);
EyeTiltProposal solve_eye_tilt(const SphericalPoint& target, const EyeModel& eye);

/// Builds the proposal record for an externally imposed tilt (for example
/// one executed by hand), with the residual measured against `target`.
EyeTiltProposal proposal_for_tilt(double alpha_deg, double beta_deg, const Vec3& target,
                                  const EyeModel& eye);

}  // namespace retina
