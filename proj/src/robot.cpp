#include "retina/robot.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "retina/errors.hpp"

namespace retina {

void PcjmModel::validate() const {
  if (!(stroke_mm > 0.0) || !(sweep_step_mm > 0.0) || !(effective_length_mm > stroke_mm * 2.0)) {
    throw PlanningError(ErrorCode::InvalidArgument,
                        "PCJM model needs stroke > 0, step > 0 and L_eff > 2 * stroke");
  }
  if (std::abs(initial_position_mm) > stroke_mm + 1e-12) {
    throw PlanningError(ErrorCode::InvalidArgument, "PCJM initial position outside the stroke");
  }
}

double pcjm_theta2(double actuator_mm, double p0_mm, const PcjmModel& m) {
  return rad2deg(std::asin((actuator_mm - p0_mm) / m.effective_length_mm));
}

double pcjm_actuator(double theta2_deg, double p0_mm, const PcjmModel& m) {
  return p0_mm + m.effective_length_mm * std::sin(deg2rad(theta2_deg));
}

WorkingAngle working_angle(double p0_mm, const PcjmModel& m) {
  if (std::abs(p0_mm) > m.stroke_mm + 1e-12) {
    throw PlanningError(ErrorCode::InvalidArgument, "initial position outside the stroke");
  }
  WorkingAngle w;
  w.min_deg = pcjm_theta2(-m.stroke_mm, p0_mm, m);
  w.max_deg = pcjm_theta2(m.stroke_mm, p0_mm, m);
  w.center_deg = 0.5 * (w.min_deg + w.max_deg);
  return w;
}

SweepResult sweep_initial_position(double gamma_deg, const PcjmModel& m) {
  const long n = std::lround(m.stroke_mm / m.sweep_step_mm);
  SweepResult best;
  double best_err = 0.0;
  bool first = true;
  for (long i = -n; i <= n; ++i) {
    const double p0 = std::clamp(static_cast<double>(i) * m.sweep_step_mm, -m.stroke_mm, m.stroke_mm);
    const WorkingAngle w = working_angle(p0, m);
    const double err = std::abs(w.center_deg - gamma_deg);
    const bool better = first || err < best_err - 1e-12 ||
                        (std::abs(err - best_err) <= 1e-12 && std::abs(p0) < std::abs(best.p0_mm));
    if (better) {
      best = SweepResult{p0, w, false};
      best_err = err;
      first = false;
    }
  }
  // Centres decrease as p0 grows, so the extremes bound the achievable range.
  const double lowest = working_angle(m.stroke_mm, m).center_deg;
  const double highest = working_angle(-m.stroke_mm, m).center_deg;
  best.saturated = gamma_deg < lowest || gamma_deg > highest;
  return best;
}

PcjmCalibration pcjm_calibration(const PcjmModel& shipped) {
  struct Measured {
    double p0, min_deg, max_deg;
  };
  constexpr std::array<Measured, 2> kMeasured{{{0.0, -9.86, 9.51}, {5.9, -13.88, 5.39}}};
  auto residuals = [&](double length) {
    PcjmModel m = shipped;
    m.effective_length_mm = length;
    std::vector<double> r;
    for (const auto& s : kMeasured) {
      const WorkingAngle w = working_angle(s.p0, m);
      r.push_back(w.min_deg - s.min_deg);
      r.push_back(w.max_deg - s.max_deg);
    }
    return r;
  };
  auto sse = [&](double length) {
    double acc = 0.0;
    for (double v : residuals(length)) acc += v * v;
    return acc;
  };
  // Golden-section search; the SSE is unimodal in L over this bracket.
  double lo = 2.0 * shipped.stroke_mm + 1.0;
  double hi = 400.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - g * (hi - lo);
  double b = lo + g * (hi - lo);
  for (int it = 0; it < 200; ++it) {
    if (sse(a) < sse(b)) {
      hi = b;
    } else {
      lo = a;
    }
    a = hi - g * (hi - lo);
    b = lo + g * (hi - lo);
  }
  PcjmCalibration c;
  c.shipped_length_mm = shipped.effective_length_mm;
  c.shipped_sse_deg2 = sse(shipped.effective_length_mm);
  c.fitted_length_mm = 0.5 * (lo + hi);
  c.fitted_sse_deg2 = sse(c.fitted_length_mm);
  c.shipped_residuals_deg = residuals(shipped.effective_length_mm);
  return c;
}

JointAngles solve_joint_angles(const Vec3& v_target_robot, double theta_ini_deg) {
  JointAngles j;
  j.v_target2 = rot_x(theta_ini_deg) * v_target_robot;
  j.k_mm = j.v_target2.norm();
  if (!(j.k_mm > 0.0)) {
    throw PlanningError(ErrorCode::InvalidArgument, "target coincides with the RCM point");
  }
  const Vec3& v = j.v_target2;
  j.theta2_deg = rad2deg(std::asin(std::clamp(-v.x() / j.k_mm, -1.0, 1.0)));
  j.theta4_deg = rad2deg(std::atan2(-v.y(), -v.z()));
  return j;
}

Vec3 instrument_direction_robot(double theta_ini_deg, double theta2_deg, double theta4_deg) {
  // theta4 follows the component form (-sin t2, -cos t2 sin t4, -cos t2 cos t4),
  // i.e. a clockwise turn about X.
  return rot_x(-theta_ini_deg) * rot_x(-theta4_deg) * rot_y(theta2_deg) * Vec3(0.0, 0.0, -1.0);
}

JointTarget solve_joint_target(const Vec3& target_world, const RobotSetup& setup,
                               const EyeModel& eye) {
  const Vec3 v_robot = setup.frame.to_robot(target_world - setup.rcm_world);
  const JointAngles a = solve_joint_angles(v_robot, setup.theta_ini_deg);
  JointTarget j;
  j.theta2_deg = a.theta2_deg;
  j.theta4_deg = a.theta4_deg;
  j.k_mm = a.k_mm;
  const Vec3 dir = setup.frame.to_world(
      instrument_direction_robot(setup.theta_ini_deg, a.theta2_deg, a.theta4_deg));
  try {
    j.depth_mm = line_sphere_depth(setup.rcm_world, dir, eye);
  } catch (const PlanningError& e) {
    if (e.code() != ErrorCode::NoIntersection) throw;
    j.depth_mm = 0.0;
    j.violations.emplace_back("no_depth");
  }
  if (j.depth_mm <= 0.0 && j.violations.empty()) j.violations.emplace_back("no_depth");
  if (!working_angle(setup.pcjm.initial_position_mm, setup.pcjm).contains(j.theta2_deg)) {
    j.violations.emplace_back("out_of_working_angle");
  }
  if (std::abs(j.theta4_deg) > setup.theta4_limit_deg) {
    j.violations.emplace_back("theta4_limit");
  }
  j.within_limits = j.violations.empty();
  return j;
}

void require_within_limits(const JointTarget& j) {
  if (j.within_limits) return;
  std::string what = "joint target outside limits:";
  for (const auto& v : j.violations) what += " " + v;
  throw PlanningError(ErrorCode::OutOfJointRange, what);
}

InstrumentLine rcm_pose(const Vec3& trocar_world, const RobotFrame& frame, double theta_ini_deg,
                        double theta2_deg, double theta4_deg, double depth_mm,
                        double instrument_length_mm) {
  InstrumentLine line;
  line.rcm_point = trocar_world;
  line.direction = frame.to_world(instrument_direction_robot(theta_ini_deg, theta2_deg, theta4_deg));
  line.tip_point = trocar_world + depth_mm * line.direction;
  line.instrument_length_mm = instrument_length_mm;
  line.lambda = (instrument_length_mm - depth_mm) / instrument_length_mm;
  return line;
}

}  // namespace retina
