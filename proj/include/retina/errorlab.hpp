#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retina/geometry.hpp"
#include "retina/planner.hpp"

namespace retina {

enum class ErrorKind { ZAlign, InstrTrocarOffset, TrocarRoll, TrocarYaw, EyePose };

std::string to_string(ErrorKind k);
ErrorKind error_kind_from_string(const std::string& s);
std::vector<ErrorKind> all_error_kinds();

/// Angle the instrument leans when its base sits x_error off the trocar
/// axis: atan(x / (l_instrument - l_insert)). Throws DegenerateGeometry when
/// l_instrument <= l_insert.
double instrument_offset_error(double x_error_mm, double l_instrument_mm = 35.0,
                               double l_insert_mm = 20.0);

/// Combined disturbance of the real setup relative to the planned one.
/// Angles in degrees, offsets in mm.
struct Perturbation {
  double robot_yaw_deg = 0.0;     // robot/eye misalignment about Z
  double trocar_yaw_deg = 0.0;    // trocar moved along its ring (about eye Z)
  double trocar_roll_deg = 0.0;   // trocar moved along its meridian
  double eye_alpha_deg = 0.0;     // true tilt minus planned tilt
  double eye_beta_deg = 0.0;
  double offset_x_mm = 0.0;       // instrument base offset, bends in the theta2 plane
  double offset_y_mm = 0.0;       // bends in the theta4 plane
  double l_instrument_mm = 35.0;
  double l_insert_mm = 20.0;
};

/// Maps one error kind at one magnitude onto a Perturbation. `axis` picks
/// the affected direction for eye_pose (x, y, both) and for the instrument
/// offset (x, y).
Perturbation make_perturbation(ErrorKind kind, double magnitude, const std::string& axis);

struct JointDelta {
  double theta2_deg = 0.0;
  double theta4_deg = 0.0;
  double depth_mm = 0.0;
  bool feasible = true;
};

/// Joint values the real (perturbed) setup needs to reach `target_body`,
/// keeping the planned robot tilt and PCJM offset.
JointTarget true_joint_target(const PlannerConfig& config, const PlanResult& plan,
                              const Vec3& target_body, const Perturbation& p);

/// True minus planned joints for every planned target.
std::vector<JointDelta> joint_errors(const PlannerConfig& config, const PlanResult& plan,
                                     const Perturbation& p);

struct ErrorScenario {
  ErrorKind kind = ErrorKind::ZAlign;
  std::string axis = "both";
  std::vector<double> magnitudes;
  SphericalPoint center{180.0, 0.0};
  std::vector<SphericalPoint> targets;

  void validate() const;
};

/// Default sweep: the -10..10 magnitude list (mm scaled to -1..1 for the
/// instrument offset) and the four targets 10 deg off the pole plus the pole
/// itself as centre.
ErrorScenario default_scenario(ErrorKind kind);

/// Centre plus four points at +-5 deg polar and +-10 deg azimuth.
std::vector<SphericalPoint> five_point_pattern(const SphericalPoint& center);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
  int n = 0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct JointFits {
  LineFit theta2;
  LineFit theta4;
  LineFit depth;
};

struct SensitivityRow {
  double magnitude = 0.0;
  std::vector<JointDelta> per_target;
  JointDelta aggregate;  // mean over feasible targets
  int excluded = 0;
};

struct SensitivityResult {
  ErrorKind kind = ErrorKind::ZAlign;
  std::string axis;
  std::vector<SphericalPoint> targets;
  std::vector<SensitivityRow> rows;
  JointFits aggregate_fit;
  std::vector<JointFits> per_target_fit;
  int excluded_points = 0;
};

SensitivityRow sensitivity_row(const PlannerConfig& config, const PlanResult& plan, ErrorKind kind,
                               double magnitude, const std::string& axis);

/// Plans the scenario targets on the nominal setup, then sweeps the error
/// and fits a line per joint. Points the real setup cannot reach are left
/// out of the fits and counted.
SensitivityResult run_scenario(const ErrorScenario& s, const PlannerConfig& config);

struct ErrorDistribution {
  ErrorKind kind = ErrorKind::ZAlign;
  double sd = 0.0;  // zero-mean normal
  std::string axis = "both";
};

struct MonteCarloOptions {
  int n_trials = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct SampleStats {
  double mean = 0.0;
  double sd = 0.0;
};

struct MonteCarloResult {
  std::string rng;
  std::uint64_t seed = 0;
  int n_trials = 0;
  int n_samples = 0;
  int n_excluded = 0;
  SampleStats theta2;
  SampleStats theta4;
  SampleStats depth;
};

/// Draws every distribution once per trial and records the joint errors of
/// all planned targets. Trial t uses its own generator seeded from
/// (seed, t), so results do not depend on the thread count.
MonteCarloResult monte_carlo(const PlannerConfig& config, const PlanResult& plan,
                             const std::vector<ErrorDistribution>& distributions,
                             const MonteCarloOptions& options);

}  // namespace retina
