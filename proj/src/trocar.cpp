#include "retina/trocar.hpp"

#include <cmath>

#include "retina/errors.hpp"

namespace retina {

std::string to_string(TrocarSide side) {
  return side == TrocarSide::ThreeOClock ? "3_oclock" : "9_oclock";
}

TrocarSide trocar_side_from_string(const std::string& s) {
  if (s == "3_oclock") return TrocarSide::ThreeOClock;
  if (s == "9_oclock") return TrocarSide::NineOClock;
  throw PlanningError(ErrorCode::InvalidArgument, "unknown trocar side '" + s + "'");
}

double side_azimuth_deg(TrocarSide side) {
  return side == TrocarSide::ThreeOClock ? 90.0 : -90.0;
}

TrocarLayout make_trocar_layout(const TrocarLayoutConfig& config, const EyeModel& eye) {
  if (!(config.ring_polar_deg > 0.0 && config.ring_polar_deg < 180.0)) {
    throw PlanningError(ErrorCode::InvalidArgument, "trocar ring polar angle must lie in (0, 180)");
  }
  TrocarLayout layout;
  layout.config = config;
  const double base = side_azimuth_deg(config.side);
  for (std::size_t i = 0; i < 3; ++i) {
    Trocar& t = layout.trocars[i];
    t.position = SphericalPoint{config.ring_polar_deg, base + config.azimuth_offsets_deg[i]}.normalized();
    t.world = spherical_to_cartesian(t.position, eye);
  }
  return layout;
}

Mat3 eye_tilt_rotation(double alpha_deg, double beta_deg) {
  return rot_y(beta_deg) * rot_x(alpha_deg);
}

Vec3 tilt_point(const Vec3& p, double alpha_deg, double beta_deg, const EyeModel& eye) {
  return eye.center + eye_tilt_rotation(alpha_deg, beta_deg) * (p - eye.center);
}

RotatedScene rotate_scene(const TrocarLayout& layout, const std::vector<Vec3>& targets,
                          double alpha_deg, double beta_deg, const EyeModel& eye) {
  RotatedScene out;
  for (std::size_t i = 0; i < 3; ++i) {
    out.trocars[i] = tilt_point(layout.trocars[i].world, alpha_deg, beta_deg, eye);
  }
  out.targets.reserve(targets.size());
  for (const auto& t : targets) out.targets.push_back(tilt_point(t, alpha_deg, beta_deg, eye));
  return out;
}

int select_trocar(const std::array<Vec3, 3>& trocars_after, const Vec3& target_after,
                  const RobotFrame& frame) {
  const double target_x = frame.to_robot(target_after).x();
  constexpr std::array<int, 3> kOrder{1, 0, 2};
  int best = kOrder[0];
  double best_dx = std::abs(frame.to_robot(trocars_after[1]).x() - target_x);
  for (std::size_t k = 1; k < kOrder.size(); ++k) {
    const int i = kOrder[k];
    const double dx = std::abs(frame.to_robot(trocars_after[static_cast<std::size_t>(i)]).x() - target_x);
    if (dx < best_dx - 1e-12) {
      best = i;
      best_dx = dx;
    }
  }
  return best;
}

double initial_tilt(const Vec3& v_robot) {
  if (std::hypot(v_robot.y(), v_robot.z()) < 1e-9) {
    throw PlanningError(ErrorCode::DegenerateApproach,
                        "trocar-to-target vector has no YZ component");
  }
  return rad2deg(std::atan2(-v_robot.y(), -v_robot.z()));
}

double refinement_angle(const Vec3& v_robot) {
  const double yz = std::hypot(v_robot.y(), v_robot.z());
  if (yz < 1e-9) {
    throw PlanningError(ErrorCode::DegenerateApproach,
                        "trocar-to-target vector has no YZ component");
  }
  return rad2deg(std::atan2(-v_robot.x(), yz));
}

ApproachPlan plan_approach(const TrocarLayout& layout, const Vec3& target,
                           const EyeTiltProposal& tilt, const RobotFrame& frame,
                           const EyeModel& eye, const ThetaIniBand& band, int forced_index) {
  const RotatedScene scene = rotate_scene(layout, {target}, tilt.alpha_deg, tilt.beta_deg, eye);
  ApproachPlan plan;
  plan.selected_index = forced_index >= 0 ? forced_index
                                          : select_trocar(scene.trocars, scene.targets[0], frame);
  if (plan.selected_index > 2) {
    throw PlanningError(ErrorCode::InvalidArgument, "trocar index must be 0, 1 or 2");
  }
  plan.trocar_after = scene.trocars[static_cast<std::size_t>(plan.selected_index)];
  plan.target_after = scene.targets[0];
  plan.v_trocar2target = plan.target_after - plan.trocar_after;
  plan.v_robot = frame.to_robot(plan.v_trocar2target);
  plan.theta_ini_deg = initial_tilt(plan.v_robot);
  plan.gamma_deg = refinement_angle(plan.v_robot);
  if (plan.theta_ini_deg < band.min_deg || plan.theta_ini_deg > band.max_deg) {
    plan.feasible = false;
    plan.reasons.emplace_back("theta_ini_out_of_band");
  }
  return plan;
}

}  // namespace retina
