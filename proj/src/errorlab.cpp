#include "retina/errorlab.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "retina/errors.hpp"
#include "retina/trocar.hpp"

namespace retina {

std::string to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::ZAlign: return "z_align";
    case ErrorKind::InstrTrocarOffset: return "instr_trocar_offset";
    case ErrorKind::TrocarRoll: return "trocar_roll";
    case ErrorKind::TrocarYaw: return "trocar_yaw";
    case ErrorKind::EyePose: return "eye_pose";
  }
  return "unknown";
}

ErrorKind error_kind_from_string(const std::string& s) {
  for (auto k : all_error_kinds()) {
    if (to_string(k) == s) return k;
  }
  throw PlanningError(ErrorCode::InvalidArgument, "unknown error kind: " + s);
}

std::vector<ErrorKind> all_error_kinds() {
  return {ErrorKind::ZAlign, ErrorKind::InstrTrocarOffset, ErrorKind::TrocarRoll,
          ErrorKind::TrocarYaw, ErrorKind::EyePose};
}

double instrument_offset_error(double x_error_mm, double l_instrument_mm, double l_insert_mm) {
  if (!(l_instrument_mm > l_insert_mm)) {
    throw PlanningError(ErrorCode::DegenerateGeometry,
                        "instrument must be longer than its insertion depth");
  }
  return rad2deg(std::atan(x_error_mm / (l_instrument_mm - l_insert_mm)));
}

Perturbation make_perturbation(ErrorKind kind, double magnitude, const std::string& axis) {
  if (axis != "x" && axis != "y" && axis != "both") {
    throw PlanningError(ErrorCode::InvalidArgument, "axis must be x, y or both");
  }
  Perturbation p;
  switch (kind) {
    case ErrorKind::ZAlign: p.robot_yaw_deg = magnitude; break;
    case ErrorKind::TrocarRoll: p.trocar_roll_deg = magnitude; break;
    case ErrorKind::TrocarYaw: p.trocar_yaw_deg = magnitude; break;
    case ErrorKind::EyePose:
      if (axis != "y") p.eye_alpha_deg = magnitude;
      if (axis != "x") p.eye_beta_deg = magnitude;
      break;
    case ErrorKind::InstrTrocarOffset:
      if (axis != "y") p.offset_x_mm = magnitude;
      if (axis == "y" || axis == "both") p.offset_y_mm = magnitude;
      break;
  }
  return p;
}

namespace {

void accumulate(Perturbation& into, const Perturbation& p) {
  into.robot_yaw_deg += p.robot_yaw_deg;
  into.trocar_yaw_deg += p.trocar_yaw_deg;
  into.trocar_roll_deg += p.trocar_roll_deg;
  into.eye_alpha_deg += p.eye_alpha_deg;
  into.eye_beta_deg += p.eye_beta_deg;
  into.offset_x_mm += p.offset_x_mm;
  into.offset_y_mm += p.offset_y_mm;
}

}  // namespace

JointTarget true_joint_target(const PlannerConfig& config, const PlanResult& plan,
                              const Vec3& target_body, const Perturbation& p) {
  const EyeModel& eye = config.eye;
  const double alpha = plan.tilt.alpha_deg + p.eye_alpha_deg;
  const double beta = plan.tilt.beta_deg + p.eye_beta_deg;

  Vec3 t = plan.layout.trocars[static_cast<std::size_t>(plan.approach.selected_index)].world - eye.center;
  if (p.trocar_roll_deg != 0.0) {
    const Vec3 axis = Vec3::UnitZ().cross(t);
    if (axis.norm() > 1e-12) {
      t = Eigen::AngleAxisd(deg2rad(p.trocar_roll_deg), axis.normalized()) * t;
    }
  }
  t = rot_z(p.trocar_yaw_deg) * t;

  RobotSetup setup = plan.setup;
  setup.frame.yaw_deg += p.robot_yaw_deg;
  setup.rcm_world = tilt_point(eye.center + t, alpha, beta, eye);
  const Vec3 target = tilt_point(target_body, alpha, beta, eye);
  JointTarget j = solve_joint_target(target, setup, eye);
  if (p.offset_x_mm == 0.0 && p.offset_y_mm == 0.0) return j;

  // Bent instrument: rotx(-t4) roty(t2) roty(by) rotx(bx) [0,0,-1] must
  // point along the target direction. The bend sits at the RCM so the
  // depth is unchanged.
  const double by = deg2rad(instrument_offset_error(p.offset_x_mm, p.l_instrument_mm, p.l_insert_mm));
  const double bx = deg2rad(instrument_offset_error(p.offset_y_mm, p.l_instrument_mm, p.l_insert_mm));
  const Vec3 u = (rot_x(setup.theta_ini_deg) * setup.frame.to_robot(target - setup.rcm_world)).normalized();
  const double phi = std::asin(std::clamp(-u.x() / std::cos(bx), -1.0, 1.0));
  const Vec3 w(-std::cos(bx) * std::sin(phi), std::sin(bx), -std::cos(bx) * std::cos(phi));
  j.theta2_deg = rad2deg(phi - by);
  j.theta4_deg = wrap_deg(rad2deg(std::atan2(w.z(), w.y()) - std::atan2(u.z(), u.y())));

  std::vector<std::string> kept;
  for (const auto& v : j.violations) {
    if (v == "no_depth") kept.push_back(v);
  }
  if (!working_angle(setup.pcjm.initial_position_mm, setup.pcjm).contains(j.theta2_deg)) {
    kept.emplace_back("out_of_working_angle");
  }
  if (std::abs(j.theta4_deg) > setup.theta4_limit_deg) kept.emplace_back("theta4_limit");
  j.violations = kept;
  j.within_limits = kept.empty();
  return j;
}

std::vector<JointDelta> joint_errors(const PlannerConfig& config, const PlanResult& plan,
                                     const Perturbation& p) {
  std::vector<JointDelta> out;
  out.reserve(plan.targets.size());
  for (std::size_t i = 0; i < plan.targets.size(); ++i) {
    const JointTarget& planned = plan.per_target[i].joints;
    const JointTarget real = true_joint_target(config, plan, plan.targets[i].position, p);
    JointDelta d;
    d.theta2_deg = real.theta2_deg - planned.theta2_deg;
    d.theta4_deg = real.theta4_deg - planned.theta4_deg;
    d.depth_mm = real.depth_mm - planned.depth_mm;
    d.feasible = plan.per_target[i].feasible && real.within_limits;
    out.push_back(d);
  }
  return out;
}

void ErrorScenario::validate() const {
  if (magnitudes.empty() ||
      std::find(magnitudes.begin(), magnitudes.end(), 0.0) == magnitudes.end()) {
    throw PlanningError(ErrorCode::InvalidArgument, "magnitudes must include 0");
  }
  if (targets.empty()) throw PlanningError(ErrorCode::InvalidArgument, "scenario has no targets");
  for (const auto& t : targets) {
    if (!(t.polar_deg >= 0.0 && t.polar_deg <= 180.0) || !std::isfinite(t.azimuth_deg)) {
      throw PlanningError(ErrorCode::InvalidArgument, "scenario target is not a valid spherical point");
    }
  }
}

ErrorScenario default_scenario(ErrorKind kind) {
  ErrorScenario s;
  s.kind = kind;
  s.magnitudes = {-10.0, -5.0, -2.0, -1.0, 0.0, 1.0, 2.0, 5.0, 10.0};
  if (kind == ErrorKind::InstrTrocarOffset) {
    for (auto& m : s.magnitudes) m /= 10.0;
    s.axis = "x";
  }
  s.center = SphericalPoint{180.0, 0.0};
  s.targets = {SphericalPoint{170.0, 0.0}, SphericalPoint{170.0, 90.0}, SphericalPoint{170.0, 180.0},
               SphericalPoint{170.0, -90.0}, SphericalPoint{180.0, 0.0}};
  return s;
}

std::vector<SphericalPoint> five_point_pattern(const SphericalPoint& center) {
  std::vector<SphericalPoint> out{center};
  for (double dp : {-5.0, 5.0}) {
    for (double da : {-10.0, 10.0}) {
      out.push_back(SphericalPoint{std::clamp(center.polar_deg + dp, 0.0, 180.0),
                                   center.azimuth_deg + da}.normalized());
    }
  }
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  f.n = static_cast<int>(x.size());
  if (x.size() != y.size() || x.size() < 2) return f;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= f.n;
  my /= f.n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.rms_residual = std::sqrt(ss / f.n);
  return f;
}

SensitivityRow sensitivity_row(const PlannerConfig& config, const PlanResult& plan, ErrorKind kind,
                               double magnitude, const std::string& axis) {
  SensitivityRow row;
  row.magnitude = magnitude;
  row.per_target = joint_errors(config, plan, make_perturbation(kind, magnitude, axis));
  int n = 0;
  for (const auto& d : row.per_target) {
    if (!d.feasible) {
      ++row.excluded;
      continue;
    }
    row.aggregate.theta2_deg += d.theta2_deg;
    row.aggregate.theta4_deg += d.theta4_deg;
    row.aggregate.depth_mm += d.depth_mm;
    ++n;
  }
  if (n > 0) {
    row.aggregate.theta2_deg /= n;
    row.aggregate.theta4_deg /= n;
    row.aggregate.depth_mm /= n;
  } else {
    row.aggregate.feasible = false;
  }
  return row;
}

namespace {

JointFits fit_joints(const std::vector<double>& m, const std::vector<JointDelta>& d) {
  std::vector<double> x, t2, t4, z;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d[i].feasible) continue;
    x.push_back(m[i]);
    t2.push_back(d[i].theta2_deg);
    t4.push_back(d[i].theta4_deg);
    z.push_back(d[i].depth_mm);
  }
  return JointFits{fit_line(x, t2), fit_line(x, t4), fit_line(x, z)};
}

}  // namespace

SensitivityResult run_scenario(const ErrorScenario& s, const PlannerConfig& config) {
  s.validate();
  PlanRequest req;
  for (const auto& t : s.targets) req.targets.push_back(polar_target(t, config.eye));
  req.center = s.center;
  const PlanResult plan = plan_targets(config, req);

  SensitivityResult out;
  out.kind = s.kind;
  out.axis = s.axis;
  out.targets = s.targets;
  std::vector<double> mags;
  std::vector<JointDelta> agg;
  std::vector<std::vector<JointDelta>> per(s.targets.size());
  for (double m : s.magnitudes) {
    SensitivityRow row = sensitivity_row(config, plan, s.kind, m, s.axis);
    out.excluded_points += row.excluded;
    mags.push_back(m);
    agg.push_back(row.aggregate);
    for (std::size_t i = 0; i < row.per_target.size(); ++i) per[i].push_back(row.per_target[i]);
    out.rows.push_back(std::move(row));
  }
  out.aggregate_fit = fit_joints(mags, agg);
  for (const auto& p : per) out.per_target_fit.push_back(fit_joints(mags, p));
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

SampleStats stats_of(const std::vector<double>& v) {
  SampleStats s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

}  // namespace

MonteCarloResult monte_carlo(const PlannerConfig& config, const PlanResult& plan,
                             const std::vector<ErrorDistribution>& distributions,
                             const MonteCarloOptions& options) {
  if (options.n_trials < 1) throw PlanningError(ErrorCode::InvalidArgument, "n_trials must be >= 1");
  for (const auto& d : distributions) {
    if (!(d.sd >= 0.0)) throw PlanningError(ErrorCode::InvalidArgument, "sd must be >= 0");
  }
  const int n = options.n_trials;
  std::vector<std::vector<JointDelta>> trials(static_cast<std::size_t>(n));

  auto run_trial = [&](int t) {
    std::mt19937_64 gen(splitmix64(options.seed ^ splitmix64(static_cast<std::uint64_t>(t))));
    std::normal_distribution<double> normal(0.0, 1.0);
    Perturbation total;
    for (const auto& d : distributions) {
      // Draw even for sd == 0 so every distribution keeps its stream slot.
      const double z = normal(gen);
      accumulate(total, make_perturbation(d.kind, d.sd * z, d.axis));
    }
    trials[static_cast<std::size_t>(t)] = joint_errors(config, plan, total);
  };

  const int threads = std::max(1, std::min(options.threads, n));
  if (threads == 1) {
    for (int t = 0; t < n; ++t) run_trial(t);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (int t = w; t < n; t += threads) run_trial(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  MonteCarloResult r;
  r.rng = "mt19937_64 (per-trial seed splitmix64(seed ^ splitmix64(trial)))";
  r.seed = options.seed;
  r.n_trials = n;
  std::vector<double> t2, t4, z;
  for (const auto& trial : trials) {
    for (const auto& d : trial) {
      if (!d.feasible) {
        ++r.n_excluded;
        continue;
      }
      t2.push_back(d.theta2_deg);
      t4.push_back(d.theta4_deg);
      z.push_back(d.depth_mm);
    }
  }
  r.n_samples = static_cast<int>(t2.size());
  r.theta2 = stats_of(t2);
  r.theta4 = stats_of(t4);
  r.depth = stats_of(z);
  return r;
}

}  // namespace retina
