#pragma once

#include <array>
#include <string>
#include <vector>

#include "retina/geometry.hpp"
#include "retina/posture.hpp"

namespace retina {

enum class TrocarSide { ThreeOClock, NineOClock };

std::string to_string(TrocarSide side);
TrocarSide trocar_side_from_string(const std::string& s);

/// World azimuth of the middle trocar: +X (90) for 3 o'clock, -X for 9.
double side_azimuth_deg(TrocarSide side);

struct TrocarLayoutConfig {
  double ring_polar_deg = 45.0;
  TrocarSide side = TrocarSide::ThreeOClock;
  std::array<double, 3> azimuth_offsets_deg{-20.0, 0.0, 20.0};
};

struct Trocar {
  SphericalPoint position;
  Vec3 world = Vec3::Zero();
};

struct TrocarLayout {
  TrocarLayoutConfig config;
  std::array<Trocar, 3> trocars;
};

TrocarLayout make_trocar_layout(const TrocarLayoutConfig& config, const EyeModel& eye);

/// Orientation of the robot base relative to the eye. The robot's Y axis
/// points from the eye toward its trocar side, so the initial tilt is a
/// rotation about robot X and the PCJM joint (theta2) moves the tip along
/// robot X. `yaw_deg` is the world azimuth that maps onto robot +Y.
struct RobotFrame {
  double yaw_deg = 90.0;

  Mat3 world_to_robot() const { return rot_z(yaw_deg); }
  Vec3 to_robot(const Vec3& v) const { return world_to_robot() * v; }
  Vec3 to_world(const Vec3& v) const { return world_to_robot().transpose() * v; }

  static RobotFrame facing(TrocarSide side, double yaw_error_deg = 0.0) {
    return RobotFrame{side_azimuth_deg(side) + yaw_error_deg};
  }
};

/// roty(beta) rotx(alpha), the rigid motion the eye undergoes when tilted.
Mat3 eye_tilt_rotation(double alpha_deg, double beta_deg);
Vec3 tilt_point(const Vec3& p, double alpha_deg, double beta_deg, const EyeModel& eye);

struct RotatedScene {
  std::array<Vec3, 3> trocars;
  std::vector<Vec3> targets;
};

RotatedScene rotate_scene(const TrocarLayout& layout, const std::vector<Vec3>& targets,
                          double alpha_deg, double beta_deg, const EyeModel& eye);

/// Index of the trocar closest to the target along robot X. Ties go to the
/// middle trocar, then to the lower index.
int select_trocar(const std::array<Vec3, 3>& trocars_after, const Vec3& target_after,
                  const RobotFrame& frame);

/// Robot tilt about X that aligns the instrument with the YZ projection of
/// the trocar-to-target vector (robot frame), measured from -Z. Throws
/// DegenerateApproach when the projection vanishes.
double initial_tilt(const Vec3& v_robot);

/// Angle between the trocar-to-target vector and its YZ projection, signed
/// so that it equals the theta2 rotation that reaches the target.
double refinement_angle(const Vec3& v_robot);

struct ThetaIniBand {
  double min_deg = 15.0;
  double max_deg = 31.0;
};

struct ApproachPlan {
  int selected_index = 1;
  Vec3 trocar_after = Vec3::Zero();
  Vec3 target_after = Vec3::Zero();
  Vec3 v_trocar2target = Vec3::Zero();  // world frame
  Vec3 v_robot = Vec3::Zero();          // same vector in robot frame
  double theta_ini_deg = 0.0;
  double gamma_deg = 0.0;
  bool feasible = true;
  std::vector<std::string> reasons;
};

/// Approach planning without the PCJM sweep: trocar choice, theta_ini and gamma for
/// the (tilted) eye. Trocar choice can be forced with `forced_index`.
ApproachPlan plan_approach(const TrocarLayout& layout, const Vec3& target,
                           const EyeTiltProposal& tilt, const RobotFrame& frame,
                           const EyeModel& eye, const ThetaIniBand& band = {},
                           int forced_index = -1);

}  // namespace retina
