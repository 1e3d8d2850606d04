#include "retina/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "retina/errors.hpp"

namespace retina {

Mat3 rot_x(double angle_deg) {
  const double a = deg2rad(angle_deg);
  const double c = std::cos(a);
  const double s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return m;
}

Mat3 rot_y(double angle_deg) {
  const double a = deg2rad(angle_deg);
  const double c = std::cos(a);
  const double s = std::sin(a);
  Mat3 m;
  m << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return m;
}

Mat3 rot_z(double angle_deg) {
  const double a = deg2rad(angle_deg);
  const double c = std::cos(a);
  const double s = std::sin(a);
  Mat3 m;
  m << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return m;
}

double wrap_deg(double angle_deg) {
  double a = std::fmod(angle_deg, 360.0);
  if (a <= -180.0) a += 360.0;
  if (a > 180.0) a -= 360.0;
  return a;
}

void EyeModel::validate() const {
  if (!(radius_mm > 0.0) || !std::isfinite(radius_mm)) {
    throw PlanningError(ErrorCode::InvalidArgument, "eye radius must be positive");
  }
  if (!(tilt_limit_deg > 0.0)) {
    throw PlanningError(ErrorCode::InvalidArgument, "tilt limit must be positive");
  }
  if (std::abs(tilt_alpha_deg) > tilt_limit_deg + 1e-12 ||
      std::abs(tilt_beta_deg) > tilt_limit_deg + 1e-12) {
    throw PlanningError(ErrorCode::InvalidArgument, "eye tilt exceeds tilt limit");
  }
}

SphericalPoint SphericalPoint::normalized() const {
  if (!(polar_deg >= 0.0 && polar_deg <= 180.0) || !std::isfinite(azimuth_deg)) {
    throw PlanningError(ErrorCode::InvalidArgument,
                        "polar angle must lie in [0, 180], got " + std::to_string(polar_deg));
  }
  return {polar_deg, wrap_deg(azimuth_deg)};
}

Vec3 spherical_to_cartesian(const SphericalPoint& p, const EyeModel& eye) {
  const SphericalPoint q = p.normalized();
  const double polar = deg2rad(q.polar_deg);
  const double az = deg2rad(q.azimuth_deg);
  const double s = std::sin(polar);
  return eye.center + eye.radius_mm * Vec3(s * std::sin(az), s * std::cos(az), std::cos(polar));
}

SphericalPoint direction_to_spherical(const Vec3& direction) {
  const double n = direction.norm();
  if (!(n > 0.0)) {
    throw PlanningError(ErrorCode::InvalidArgument, "zero direction has no spherical angles");
  }
  const Vec3 u = direction / n;
  const double rho = std::hypot(u.x(), u.y());
  SphericalPoint p;
  p.polar_deg = rad2deg(std::atan2(rho, u.z()));
  // Azimuth is undefined on the axis; pin it to 0.
  p.azimuth_deg = rho < 1e-15 ? 0.0 : rad2deg(std::atan2(u.x(), u.y()));
  return p;
}

SphericalPoint cartesian_to_spherical(const Vec3& point, const EyeModel& eye,
                                      double tolerance_mm) {
  const Vec3 rel = point - eye.center;
  const double off = std::abs(rel.norm() - eye.radius_mm);
  if (off > tolerance_mm) {
    throw PlanningError(ErrorCode::OffSphere,
                        "point is " + std::to_string(off) + " mm off the eye sphere");
  }
  return direction_to_spherical(rel);
}

double central_angle_deg(const Vec3& a, const Vec3& b, const Vec3& center) {
  const Vec3 u = a - center;
  const Vec3 v = b - center;
  // atan2 form stays accurate for nearly coincident points.
  return rad2deg(std::atan2(u.cross(v).norm(), u.dot(v)));
}

double geodesic_mm(const Vec3& a, const Vec3& b, const EyeModel& eye) {
  return eye.radius_mm * deg2rad(central_angle_deg(a, b, eye.center));
}

double line_sphere_depth(const Vec3& origin, const Vec3& direction, const EyeModel& eye) {
  const double dn = direction.norm();
  if (!(dn > 0.0)) {
    throw PlanningError(ErrorCode::InvalidArgument, "instrument direction is zero");
  }
  const Vec3 d = direction / dn;
  const Vec3 oc = origin - eye.center;
  if (std::abs(oc.norm() - eye.radius_mm) > 2.0) {
    throw PlanningError(ErrorCode::InvalidArgument,
                        "RCM point is more than 2 mm from the eye surface");
  }
  const double b = d.dot(oc);
  const double c = oc.squaredNorm() - eye.radius_mm * eye.radius_mm;
  const double disc = b * b - c;
  double t = 0.0;
  if (std::abs(disc) < 1e-12) {
    t = -b;
  } else if (disc < 0.0) {
    throw PlanningError(ErrorCode::NoIntersection, "instrument line misses the eye sphere");
  } else {
    t = -b + std::sqrt(disc);
  }
  if (t < -1e-9) {
    throw PlanningError(ErrorCode::NoIntersection, "eye sphere lies behind the RCM point");
  }
  return std::max(t, 0.0);
}

double line_sphere_depth(const InstrumentLine& line, const EyeModel& eye) {
  return line_sphere_depth(line.rcm_point, line.direction, eye);
}

}  // namespace retina
