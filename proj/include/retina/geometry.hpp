#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace retina {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

inline double deg2rad(double deg) { return deg * kDegToRad; }
inline double rad2deg(double rad) { return rad * kRadToDeg; }

/// Right-handed elementary rotations, angle in degrees.
Mat3 rot_x(double angle_deg);
Mat3 rot_y(double angle_deg);
Mat3 rot_z(double angle_deg);

/// Wraps an angle to (-180, 180].
double wrap_deg(double angle_deg);

/// Eye model in the world frame: +Z from the eye centre toward the cornea,
/// +X toward the 3-o'clock trocar side.
struct EyeModel {
  double radius_mm = 12.1;
  Vec3 center = Vec3::Zero();
  double tilt_alpha_deg = 0.0;
  double tilt_beta_deg = 0.0;
  double tilt_limit_deg = 10.0;

  /// Throws InvalidArgument if radius or tilt violate the model invariants.
  void validate() const;
};

/// Point on the eye sphere. polar_deg is measured from the corneal pole
/// (+Z), so the posterior pole sits at 180. azimuth_deg is 0 at +Y and grows
/// toward +X.
struct SphericalPoint {
  double polar_deg = 180.0;
  double azimuth_deg = 0.0;

  /// Clamps nothing; throws InvalidArgument when polar is outside [0, 180]
  /// and returns a copy with azimuth wrapped to (-180, 180].
  SphericalPoint normalized() const;
};

Vec3 spherical_to_cartesian(const SphericalPoint& p, const EyeModel& eye);

/// Inverse of spherical_to_cartesian. Rejects points further than
/// `tolerance_mm` from the sphere surface with OffSphere.
SphericalPoint cartesian_to_spherical(const Vec3& point, const EyeModel& eye,
                                      double tolerance_mm = 1e-6);

/// Unit direction of a point relative to the eye centre, no sphere check.
SphericalPoint direction_to_spherical(const Vec3& direction);

/// Central angle between two points on (or near) the sphere, degrees.
double central_angle_deg(const Vec3& a, const Vec3& b, const Vec3& center);

/// Great-circle distance between two sphere points, mm.
double geodesic_mm(const Vec3& a, const Vec3& b, const EyeModel& eye);

/// Instrument held through a remote centre of motion. p5 is the end of the
/// last robot joint, `instrument_length_mm` behind the tip along `direction`.
struct InstrumentLine {
  Vec3 rcm_point = Vec3::Zero();
  Vec3 direction = -Vec3::UnitZ();  // unit, from trocar into the eye
  Vec3 tip_point = Vec3::Zero();
  double instrument_length_mm = 35.0;
  double lambda = 0.0;  // rcm = p5 + lambda * (tip - p5)

  Vec3 p5() const { return tip_point - instrument_length_mm * direction; }
};

/// Distance along `direction` from `origin` to the distal intersection with
/// the eye sphere (the larger quadratic root). Grazing lines, whose
/// discriminant is within 1e-12 of zero, return the tangency point.
/// Throws NoIntersection when the line misses the sphere and
/// InvalidArgument when the origin is further than radius + 2 mm from the
/// centre.
double line_sphere_depth(const Vec3& origin, const Vec3& direction, const EyeModel& eye);
double line_sphere_depth(const InstrumentLine& line, const EyeModel& eye);

}  // namespace retina
