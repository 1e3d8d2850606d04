#pragma once

#include <string>
#include <vector>

#include "retina/geometry.hpp"
#include "retina/trocar.hpp"

namespace retina {

/// Reduced PCJM model: the two linear actuators' differential stroke s sets
/// theta2 = asin((s - p0) / L_eff). L_eff = 80.1 mm reproduces the measured
/// working angles of the physical mechanism; it is not the link geometry.
struct PcjmModel {
  double stroke_mm = 13.5;  // half stroke
  double sweep_step_mm = 0.1;
  double effective_length_mm = 80.1;
  double initial_position_mm = 0.0;

  void validate() const;
};

struct WorkingAngle {
  double min_deg = 0.0;
  double max_deg = 0.0;
  double center_deg = 0.0;

  double span_deg() const { return max_deg - min_deg; }
  bool contains(double theta2_deg, double tol = 1e-9) const {
    return theta2_deg >= min_deg - tol && theta2_deg <= max_deg + tol;
  }
};

double pcjm_theta2(double actuator_mm, double p0_mm, const PcjmModel& m);
/// Actuator stroke needed for `theta2_deg` with initial position p0.
double pcjm_actuator(double theta2_deg, double p0_mm, const PcjmModel& m);

WorkingAngle working_angle(double p0_mm, const PcjmModel& m);

struct SweepResult {
  double p0_mm = 0.0;
  WorkingAngle angle;
  bool saturated = false;  // gamma lies beyond every achievable centre
};

/// Grid search over p0 in [-stroke, stroke] (sweep_step spacing) for the
/// working-angle centre closest to gamma; ties go to the smaller |p0|.
SweepResult sweep_initial_position(double gamma_deg, const PcjmModel& m);

struct PcjmCalibration {
  double shipped_length_mm = 0.0;
  double shipped_sse_deg2 = 0.0;
  double fitted_length_mm = 0.0;  // unconstrained least squares
  double fitted_sse_deg2 = 0.0;
  std::vector<double> shipped_residuals_deg;  // (min0, max0, min5.9, max5.9) model - measured
};

/// Fits L_eff against the working angles measured at p0 = 0 and p0 = 5.9 mm
/// and reports the residuals of the shipped constant.
PcjmCalibration pcjm_calibration(const PcjmModel& shipped = {});

/// Joint solve: rotates the robot-frame target vector by theta_ini and
/// reads off the joint angles of k (-sin t2, -cos t2 sin t4, -cos t2 cos t4)
/// (theta4 turns clockwise about X).
struct JointAngles {
  double theta2_deg = 0.0;  // about robot Y
  double theta4_deg = 0.0;  // about robot X
  double k_mm = 0.0;
  Vec3 v_target2 = Vec3::Zero();
};

JointAngles solve_joint_angles(const Vec3& v_target_robot, double theta_ini_deg);

/// Unit instrument direction in the robot frame for the given joints.
Vec3 instrument_direction_robot(double theta_ini_deg, double theta2_deg, double theta4_deg);

/// Physical placement fixed once per plan (RCM, robot tilt, PCJM offset).
struct RobotSetup {
  RobotFrame frame;
  Vec3 rcm_world = Vec3::Zero();
  double theta_ini_deg = 0.0;
  PcjmModel pcjm;
  double theta4_limit_deg = 45.0;
  double instrument_length_mm = 35.0;
};

struct JointTarget {
  double theta2_deg = 0.0;
  double theta4_deg = 0.0;
  double depth_mm = 0.0;
  double k_mm = 0.0;
  bool within_limits = true;
  std::vector<std::string> violations;  // out_of_working_angle, theta4_limit, no_depth
};

/// Joint values that put the tip on `target_world`; the depth is the distal
/// sphere intersection along the reconstructed instrument axis. Limits are
/// reported, not enforced (see require_within_limits).
JointTarget solve_joint_target(const Vec3& target_world, const RobotSetup& setup,
                               const EyeModel& eye);

/// Throws OutOfJointRange listing the violations.
void require_within_limits(const JointTarget& j);

/// Instrument held through the trocar for the given joint values.
InstrumentLine rcm_pose(const Vec3& trocar_world, const RobotFrame& frame, double theta_ini_deg,
                        double theta2_deg, double theta4_deg, double depth_mm,
                        double instrument_length_mm = 35.0);

}  // namespace retina
