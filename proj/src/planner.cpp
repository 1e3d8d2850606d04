#include "retina/planner.hpp"

#include <algorithm>
#include <cmath>

#include "retina/errors.hpp"

namespace retina {

PlanTarget polar_target(const SphericalPoint& p, const EyeModel& eye) {
  PlanTarget t;
  t.source = "polar";
  t.polar = p.normalized();
  t.position = spherical_to_cartesian(t.polar, eye);
  return t;
}

Vec3 spherical_centroid(const std::vector<Vec3>& points, const EyeModel& eye) {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) sum += (p - eye.center).normalized();
  if (sum.norm() < 1e-12) {
    throw PlanningError(ErrorCode::SceneInvalid, "targets have no well-defined centre");
  }
  return eye.center + eye.radius_mm * sum.normalized();
}

bool is_visible(const Vec3& target, double alpha_deg, double beta_deg, double view_angle_deg,
                const EyeModel& eye) {
  const Vec3 fov = fov_center_vector(alpha_deg, beta_deg, eye);
  return central_angle_deg(fov, target, eye.center) <= view_angle_deg / 2.0 + 1e-9;
}

namespace {

void add_reason(std::vector<std::string>& reasons, const std::string& r) {
  if (std::find(reasons.begin(), reasons.end(), r) == reasons.end()) reasons.push_back(r);
}

EyeTiltProposal tilt_for_center(const PlannerConfig& config, const Vec3& center,
                                std::vector<std::string>& notes) {
  try {
    return solve_eye_tilt(center, config.eye);
  } catch (const PlanningError& e) {
    if (e.code() != ErrorCode::Unreachable) throw;
    // Beyond the reach of the tilt equations: lean as far as allowed.
    const Vec3 t = center - config.eye.center;
    const double lim = config.eye.tilt_limit_deg;
    const double r = config.eye.radius_mm;
    const double alpha = std::clamp(0.5 * rad2deg(std::asin(std::clamp(-t.y() / r, -1.0, 1.0))), -lim, lim);
    const double beta = t.x() >= 0.0 ? lim : -lim;
    EyeTiltProposal p = proposal_for_tilt(alpha, beta, center, config.eye);
    p.clamped = true;
    notes.emplace_back("tilt_unreachable");
    return p;
  }
}

}  // namespace

PlanResult plan_targets(const PlannerConfig& config, const PlanRequest& request) {
  if (request.targets.empty()) {
    throw PlanningError(ErrorCode::SceneInvalid, "plan needs at least one target");
  }
  config.eye.validate();
  config.pcjm.validate();
  const EyeModel& eye = config.eye;

  PlanResult out;
  out.targets = request.targets;
  if (request.center) {
    out.center = polar_target(*request.center, eye);
  } else if (request.targets.size() == 1) {
    out.center = request.targets.front();
  } else {
    std::vector<Vec3> pts;
    for (const auto& t : request.targets) pts.push_back(t.position);
    out.center = polar_target(cartesian_to_spherical(spherical_centroid(pts, eye), eye), eye);
  }

  if (request.executed_tilt) {
    out.tilt = proposal_for_tilt(request.executed_tilt->alpha_deg, request.executed_tilt->beta_deg,
                                 out.center.position, eye);
    out.tilt_from_operator = true;
  } else {
    out.tilt = tilt_for_center(config, out.center.position, out.tilt_notes);
  }

  out.layout = make_trocar_layout(config.trocars, eye);
  const RobotFrame frame = RobotFrame::facing(config.trocars.side);
  out.approach = plan_approach(out.layout, out.center.position, out.tilt, frame, eye,
                               config.theta_ini_band, request.forced_trocar);
  out.sweep = sweep_initial_position(out.approach.gamma_deg, config.pcjm);

  out.setup.frame = frame;
  out.setup.rcm_world = out.approach.trocar_after;
  out.setup.theta_ini_deg = out.approach.theta_ini_deg;
  out.setup.pcjm = config.pcjm;
  out.setup.pcjm.initial_position_mm = out.sweep.p0_mm;
  out.setup.theta4_limit_deg = config.theta4_limit_deg;
  out.setup.instrument_length_mm = config.instrument_length_mm;

  out.per_target.reserve(request.targets.size());
  for (const auto& t : request.targets) {
    TargetPlan tp;
    tp.target_after = tilt_point(t.position, out.tilt.alpha_deg, out.tilt.beta_deg, eye);
    tp.joints = solve_joint_target(tp.target_after, out.setup, eye);
    tp.visible = is_visible(t.position, out.tilt.alpha_deg, out.tilt.beta_deg,
                            config.view_angle_deg, eye);
    for (const auto& v : tp.joints.violations) add_reason(tp.reasons, v);
    if (!tp.visible) add_reason(tp.reasons, "not_visible");
    for (const auto& r : out.approach.reasons) add_reason(tp.reasons, r);
    tp.feasible = tp.reasons.empty();
    if (!tp.feasible) {
      if (out.tilt.clamped) add_reason(tp.reasons, "tilt_clamped");
      for (const auto& n : out.tilt_notes) add_reason(tp.reasons, n);
      if (out.sweep.saturated) add_reason(tp.reasons, "pcjm_saturated");
    }
    out.feasible = out.feasible && tp.feasible;
    out.per_target.push_back(std::move(tp));
  }
  return out;
}

SimulatedRig SimulatedRig::from_plan(const PlannerConfig& config, const PlanResult& plan) {
  SimulatedRig rig;
  rig.eye = config.eye;
  rig.alpha_deg = plan.tilt.alpha_deg;
  rig.beta_deg = plan.tilt.beta_deg;
  rig.trocar_body = plan.layout.trocars[static_cast<std::size_t>(plan.approach.selected_index)].world;
  rig.robot_yaw_deg = plan.setup.frame.yaw_deg;
  rig.theta_ini_deg = plan.setup.theta_ini_deg;
  return rig;
}

Vec3 SimulatedRig::tip_world(double theta2_deg, double theta4_deg, double depth_mm) const {
  using Eigen::AngleAxisd;
  const Eigen::Isometry3d eye_pose(AngleAxisd(deg2rad(beta_deg), Vec3::UnitY()) *
                                   AngleAxisd(deg2rad(alpha_deg), Vec3::UnitX()));
  const Vec3 rcm = eye.center + eye_pose.linear() * (trocar_body - eye.center);

  // Robot chain: base yaw, initial tilt, theta4 about X, theta2 about Y, bend,
  // then insertion along the tool's -Z.
  Eigen::Isometry3d tool = Eigen::Isometry3d::Identity();
  tool.translate(rcm);
  tool.rotate(AngleAxisd(-deg2rad(robot_yaw_deg), Vec3::UnitZ()));
  tool.rotate(AngleAxisd(-deg2rad(theta_ini_deg), Vec3::UnitX()));
  tool.rotate(AngleAxisd(-deg2rad(theta4_deg), Vec3::UnitX()));
  tool.rotate(AngleAxisd(deg2rad(theta2_deg), Vec3::UnitY()));
  tool.rotate(AngleAxisd(deg2rad(bend_about_tool_y_deg), Vec3::UnitY()));
  tool.rotate(AngleAxisd(deg2rad(bend_about_tool_x_deg), Vec3::UnitX()));
  tool.translate(Vec3(0.0, 0.0, -depth_mm));
  return tool.translation();
}

Vec3 SimulatedRig::tip_body(double theta2_deg, double theta4_deg, double depth_mm) const {
  using Eigen::AngleAxisd;
  const Mat3 eye_rot = (AngleAxisd(deg2rad(beta_deg), Vec3::UnitY()) *
                        AngleAxisd(deg2rad(alpha_deg), Vec3::UnitX()))
                           .toRotationMatrix();
  return eye.center + eye_rot.transpose() * (tip_world(theta2_deg, theta4_deg, depth_mm) - eye.center);
}

}  // namespace retina
