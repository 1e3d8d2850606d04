#include "retina/posture.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "retina/errors.hpp"

namespace retina {

Vec3 fov_center_vector(double alpha_deg, double beta_deg, const EyeModel& eye) {
  const double a2 = deg2rad(2.0 * alpha_deg);
  const double b2 = deg2rad(2.0 * beta_deg);
  const double r = eye.radius_mm;
  return eye.center + Vec3(r * std::sin(b2) * std::cos(a2), -r * std::sin(a2),
                           -r * std::cos(a2) * std::cos(b2));
}

SphericalPoint fov_center_after_tilt(double alpha_deg, double beta_deg, const EyeModel& eye) {
  return direction_to_spherical(fov_center_vector(alpha_deg, beta_deg, eye) - eye.center);
}

EyeTiltProposal proposal_for_tilt(double alpha_deg, double beta_deg, const Vec3& target,
                                  const EyeModel& eye) {
  EyeTiltProposal p;
  p.alpha_deg = alpha_deg;
  p.beta_deg = beta_deg;
  const Vec3 fov = fov_center_vector(alpha_deg, beta_deg, eye);
  p.fov_center_after = direction_to_spherical(fov - eye.center);
  p.residual_mm = geodesic_mm(fov, target, eye);
  return p;
}

EyeTiltProposal solve_eye_tilt(const Vec3& target, const EyeModel& eye) {
  const Vec3 t = target - eye.center;
  if (std::abs(t.norm() - eye.radius_mm) > 1e-6) {
    throw PlanningError(ErrorCode::OffSphere, "tilt target is not on the eye sphere");
  }
  const double r = eye.radius_mm;
  if (t.z() > 1e-9) {
    // The tilt equations only reach the posterior hemisphere; an anterior
    // target would silently alias onto its mirror image.
    throw PlanningError(ErrorCode::Unreachable, "target lies in the anterior hemisphere");
  }
  const double alpha = 0.5 * rad2deg(std::asin(std::clamp(-t.y() / r, -1.0, 1.0)));
  const double arg = t.x() / (r * std::cos(deg2rad(2.0 * alpha)));
  if (!(std::abs(arg) <= 1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "no eye tilt centres the view on this target (x/(r cos 2a) = " << arg << ")";
    throw PlanningError(ErrorCode::Unreachable, msg.str());
  }
  const double beta = 0.5 * rad2deg(std::asin(std::clamp(arg, -1.0, 1.0)));

  const double lim = eye.tilt_limit_deg;
  const double a = std::clamp(alpha, -lim, lim);
  const double b = std::clamp(beta, -lim, lim);
  EyeTiltProposal p = proposal_for_tilt(a, b, target, eye);
  p.clamped = (a != alpha) || (b != beta);
  return p;
}

EyeTiltProposal solve_eye_tilt(const SphericalPoint& target, const EyeModel& eye) {
  return solve_eye_tilt(spherical_to_cartesian(target, eye), eye);
}

}  // namespace retina
