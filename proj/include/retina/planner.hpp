#pragma once

#include <optional>
#include <string>
#include <vector>

#include "retina/fundus.hpp"
#include "retina/geometry.hpp"
#include "retina/posture.hpp"
#include "retina/robot.hpp"
#include "retina/trocar.hpp"

namespace retina {

/// Everything the planning pipeline needs to know about one surgical setup.
struct PlannerConfig {
  EyeModel eye;
  TrocarLayoutConfig trocars;
  PcjmModel pcjm;
  double theta4_limit_deg = 45.0;
  ThetaIniBand theta_ini_band;
  double instrument_length_mm = 35.0;
  double view_angle_deg = 60.0;  // microscope cone used for visibility
};

struct PlanTarget {
  std::string source = "polar";  // "pixel" or "polar"
  std::optional<PixelTarget> pixel;
  bool compensated = false;
  SphericalPoint polar;
  Vec3 position = Vec3::Zero();  // eye-body frame (untilted)
};

PlanTarget polar_target(const SphericalPoint& p, const EyeModel& eye);

struct TargetPlan {
  JointTarget joints;
  Vec3 target_after = Vec3::Zero();
  bool visible = true;
  bool feasible = true;
  std::vector<std::string> reasons;
};

struct ExecutedTilt {
  double alpha_deg = 0.0;
  double beta_deg = 0.0;
};

struct PlanRequest {
  std::vector<PlanTarget> targets;
  std::optional<SphericalPoint> center;        // defaults to the spherical centroid
  std::optional<ExecutedTilt> executed_tilt;  // tilt applied by hand, replans downstream
  int forced_trocar = -1;
};

struct PlanResult {
  std::vector<PlanTarget> targets;
  PlanTarget center;
  EyeTiltProposal tilt;
  bool tilt_from_operator = false;
  std::vector<std::string> tilt_notes;
  TrocarLayout layout;
  ApproachPlan approach;
  SweepResult sweep;
  RobotSetup setup;
  std::vector<TargetPlan> per_target;
  bool feasible = true;
};

/// Normalised mean of the targets, projected back onto the sphere.
Vec3 spherical_centroid(const std::vector<Vec3>& points, const EyeModel& eye);

/// Full pipeline: eye tilt for the target centre, trocar choice, robot tilt,
/// PCJM initial position, then joint targets for every point. Infeasible
/// targets carry reasons; the batch never aborts on them. Throws
/// SceneInvalid for an empty target list.
PlanResult plan_targets(const PlannerConfig& config, const PlanRequest& request);

/// True when `target` (eye-body frame) is inside the microscope cone after
/// the eye is tilted by (alpha, beta).
bool is_visible(const Vec3& target, double alpha_deg, double beta_deg, double view_angle_deg,
                const EyeModel& eye);

/// Rigid-body rig used to execute joint commands: a tilted eye carrying its
/// trocar, a robot whose RCM sits on that trocar, and an instrument bent by
/// an optional angle at its base.
struct SimulatedRig {
  EyeModel eye;
  double alpha_deg = 0.0;
  double beta_deg = 0.0;
  Vec3 trocar_body = Vec3::Zero();  // trocar position before the tilt
  double robot_yaw_deg = 90.0;
  double theta_ini_deg = 0.0;
  double bend_about_tool_y_deg = 0.0;
  double bend_about_tool_x_deg = 0.0;

  static SimulatedRig from_plan(const PlannerConfig& config, const PlanResult& plan);

  /// Tip position in the world frame for the commanded joints.
  Vec3 tip_world(double theta2_deg, double theta4_deg, double depth_mm) const;
  /// Same tip mapped back into the untilted eye-body frame.
  Vec3 tip_body(double theta2_deg, double theta4_deg, double depth_mm) const;
};

}  // namespace retina
