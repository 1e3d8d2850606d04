#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "retina/errors.hpp"
#include "retina/workflow.hpp"

namespace retina {

double round6(double v) {
  const double r = std::round(v * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;  // no negative zero in the output
}

json spherical_to_json(const SphericalPoint& p) {
  return json{{"polar_deg", round6(p.polar_deg)}, {"azimuth_deg", round6(p.azimuth_deg)}};
}

SphericalPoint spherical_from_json(const json& j) {
  return SphericalPoint{j.at("polar_deg").get<double>(), j.at("azimuth_deg").get<double>()};
}

json vec3_to_json(const Vec3& v) { return json::array({round6(v.x()), round6(v.y()), round6(v.z())}); }

json plan_target_to_json(const PlanTarget& t) {
  json j{{"source", t.source},
         {"compensated", t.compensated},
         {"polar", spherical_to_json(t.polar)},
         {"position_mm", vec3_to_json(t.position)}};
  if (t.pixel) {
    j["offset_px"] = {{"x_px", round6(t.pixel->x_px)}, {"y_px", round6(t.pixel->y_px)}};
    j["l_pixel"] = round6(t.pixel->l_pixel());
  }
  return j;
}

PlanInputs plan_inputs_from_json(const json& j) {
  PlanInputs in;
  if (!j.is_object()) throw PlanningError(ErrorCode::InvalidArgument, "plan request must be an object");
  try {
    if (j.contains("targets")) {
      if (!j.at("targets").is_array()) throw PlanningError(ErrorCode::InvalidArgument, "targets must be an array");
      for (const auto& t : j.at("targets")) in.targets.push_back(target_spec_from_json(t));
    }
    if (j.contains("center") && !j.at("center").is_null()) in.center = spherical_from_json(j.at("center"));
    if (j.contains("executed_tilt") && !j.at("executed_tilt").is_null()) {
      const json& t = j.at("executed_tilt");
      in.executed_tilt = ExecutedTilt{t.at("alpha_deg").get<double>(), t.at("beta_deg").get<double>()};
    }
    if (j.contains("forced_trocar")) in.forced_trocar = j.at("forced_trocar").get<int>();
  } catch (const json::exception& e) {
    throw PlanningError(ErrorCode::InvalidArgument, std::string("bad plan request: ") + e.what());
  }
  if (in.forced_trocar < -1 || in.forced_trocar > 2) {
    throw PlanningError(ErrorCode::InvalidArgument, "forced_trocar must be 0, 1 or 2");
  }
  return in;
}

json plan_inputs_to_json(const PlanInputs& in) {
  json j;
  j["targets"] = json::array();
  for (const auto& t : in.targets) j["targets"].push_back(target_spec_to_json(t));
  j["center"] = in.center ? json{{"polar_deg", in.center->polar_deg}, {"azimuth_deg", in.center->azimuth_deg}} : json();
  j["executed_tilt"] = in.executed_tilt
                           ? json{{"alpha_deg", in.executed_tilt->alpha_deg}, {"beta_deg", in.executed_tilt->beta_deg}}
                           : json();
  j["forced_trocar"] = in.forced_trocar;
  return j;
}

namespace {

json fundus_meta_to_json(const FundusImageMeta& m) {
  return json{{"width_px", m.width_px},
              {"height_px", m.height_px},
              {"view_angle_deg", round6(m.view_angle_deg)},
              {"center_px", {round6(m.detected_center_px.x()), round6(m.detected_center_px.y())}},
              {"diameter_px", round6(m.detected_diameter_px)},
              {"mm_per_px", m.mm_per_px}};
}

json strings(const std::vector<std::string>& v) { return json(v); }

}  // namespace

PlanOutcome plan_scene(const Scene& s, const PlanInputs& in, const std::string& scene_id) {
  PlanInputs eff = in;
  if (eff.targets.empty()) eff.targets = s.targets;
  if (eff.targets.empty()) throw PlanningError(ErrorCode::SceneInvalid, "plan needs at least one target");
  if (!eff.center) eff.center = s.center;
  if (!eff.executed_tilt) eff.executed_tilt = s.executed_tilt;

  PlanOutcome o;
  const bool need_meta = std::any_of(eff.targets.begin(), eff.targets.end(),
                                     [](const TargetSpec& t) { return t.raster_px.has_value(); });
  if (need_meta) o.fundus = resolve_fundus(s);

  PlanRequest req;
  for (const auto& t : eff.targets) req.targets.push_back(resolve_target(t, s, o.fundus));
  req.center = eff.center;
  req.executed_tilt = eff.executed_tilt;
  req.forced_trocar = eff.forced_trocar;
  o.result = plan_targets(s.config, req);
  o.record = plan_record_json(s, eff, o, scene_id);
  return o;
}

json plan_record_json(const Scene& s, const PlanInputs& in, const PlanOutcome& o,
                      const std::string& scene_id) {
  const PlanResult& r = o.result;
  json inputs{{"scene", scene_to_json(s)},
              {"plan", plan_inputs_to_json(in)},
              {"fundus", o.fundus ? fundus_meta_to_json(*o.fundus) : json()}};
  json rec;
  rec["schema_version"] = kPlanSchemaVersion;
  rec["engine_version"] = kEngineVersion;
  rec["plan_id"] = sha256_hex(json{{"engine_version", kEngineVersion}, {"inputs", inputs}}.dump());
  rec["scene_id"] = scene_id;
  rec["created_at"] = iso_timestamp_utc();
  rec["inputs"] = inputs;

  rec["targets"] = json::array();
  for (const auto& t : r.targets) rec["targets"].push_back(plan_target_to_json(t));
  rec["center"] = plan_target_to_json(r.center);

  rec["eye_tilt"] = {{"alpha_deg", round6(r.tilt.alpha_deg)},
                     {"beta_deg", round6(r.tilt.beta_deg)},
                     {"clamped", r.tilt.clamped},
                     {"from_operator", r.tilt_from_operator},
                     {"fov_center_after", spherical_to_json(r.tilt.fov_center_after)},
                     {"residual_mm", round6(r.tilt.residual_mm)},
                     {"notes", strings(r.tilt_notes)}};

  json trocars = json::array();
  for (const auto& t : r.layout.trocars) {
    trocars.push_back({{"position", spherical_to_json(t.position)}, {"position_mm", vec3_to_json(t.world)}});
  }
  rec["approach"] = {{"side", to_string(r.layout.config.side)},
                     {"trocars", trocars},
                     {"selected_trocar", r.approach.selected_index},
                     {"trocar_after_mm", vec3_to_json(r.approach.trocar_after)},
                     {"center_after_mm", vec3_to_json(r.approach.target_after)},
                     {"v_trocar2target_mm", vec3_to_json(r.approach.v_trocar2target)},
                     {"v_robot_mm", vec3_to_json(r.approach.v_robot)},
                     {"theta_ini_deg", round6(r.approach.theta_ini_deg)},
                     {"gamma_deg", round6(r.approach.gamma_deg)},
                     {"feasible", r.approach.feasible},
                     {"reasons", strings(r.approach.reasons)}};

  rec["robot"] = {{"yaw_deg", round6(r.setup.frame.yaw_deg)},
                  {"rcm_mm", vec3_to_json(r.setup.rcm_world)},
                  {"theta_ini_deg", round6(r.setup.theta_ini_deg)},
                  {"p0_mm", round6(r.sweep.p0_mm)},
                  {"pcjm_saturated", r.sweep.saturated},
                  {"working_angle_deg",
                   {{"min", round6(r.sweep.angle.min_deg)},
                    {"max", round6(r.sweep.angle.max_deg)},
                    {"center", round6(r.sweep.angle.center_deg)}}},
                  {"theta4_limit_deg", round6(r.setup.theta4_limit_deg)},
                  {"instrument_length_mm", round6(r.setup.instrument_length_mm)}};

  rec["joint_targets"] = json::array();
  for (const auto& t : r.per_target) {
    rec["joint_targets"].push_back({{"theta2_deg", round6(t.joints.theta2_deg)},
                                    {"theta4_deg", round6(t.joints.theta4_deg)},
                                    {"depth_mm", round6(t.joints.depth_mm)},
                                    {"k_mm", round6(t.joints.k_mm)},
                                    {"target_after_mm", vec3_to_json(t.target_after)},
                                    {"visible", t.visible},
                                    {"feasible", t.feasible},
                                    {"reasons", strings(t.reasons)}});
  }
  rec["feasible"] = r.feasible;
  return rec;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return ss.str();
}

std::string record_digest(const json& record) {
  json copy = record;
  copy.erase("created_at");
  return sha256_hex(copy.dump());
}

std::string iso_timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

RetinalRegionSample overlay_for_plan(const PlannerConfig& config, const PlanResult& plan,
                                     const RegionGridSpec& spec) {
  return sample_region(spec, plan.tilt.alpha_deg, plan.tilt.beta_deg, config.view_angle_deg,
                       plan.setup, config.eye);
}

json overlay_to_json(const RetinalRegionSample& s, const PlanResult& plan) {
  auto mask_json = [](const Mask& m) {
    int count = 0;
    for (auto v : m) count += v ? 1 : 0;
    return json{{"encoding", "rle"}, {"first_value", 0}, {"count", count}, {"runs", rle_encode(m)}};
  };
  json j;
  j["grid_meta"] = {{"polar_min_deg", s.spec.polar_min_deg},
                    {"polar_max_deg", s.spec.polar_max_deg},
                    {"polar_step_deg", s.spec.polar_step_deg},
                    {"azimuth_step_deg", s.spec.azimuth_step_deg},
                    {"azimuth_first_deg", s.grid.empty() ? 0.0 : s.grid.front().azimuth_deg},
                    {"n_polar", s.spec.polar_count()},
                    {"n_azimuth", s.spec.azimuth_count()},
                    {"order", "polar_major"}};
  j["context"] = {{"alpha_deg", round6(plan.tilt.alpha_deg)},
                  {"beta_deg", round6(plan.tilt.beta_deg)},
                  {"selected_trocar", plan.approach.selected_index},
                  {"theta_ini_deg", round6(plan.setup.theta_ini_deg)},
                  {"p0_mm", round6(plan.sweep.p0_mm)}};
  j["masks"] = {{"visible", mask_json(s.visible)},
                {"accessible", mask_json(s.accessible)},
                {"both", mask_json(s.both)}};
  return j;
}

json joint_delta_to_json(const JointDelta& d) {
  return json{{"d_theta2_deg", round6(d.theta2_deg)},
              {"d_theta4_deg", round6(d.theta4_deg)},
              {"d_depth_mm", round6(d.depth_mm)},
              {"feasible", d.feasible}};
}

json sensitivity_row_to_json(const SensitivityRow& r) {
  json per = json::array();
  for (const auto& d : r.per_target) per.push_back(joint_delta_to_json(d));
  return json{{"magnitude", r.magnitude},
              {"per_target", per},
              {"aggregate", joint_delta_to_json(r.aggregate)},
              {"excluded", r.excluded}};
}

namespace {

json fit_json(const LineFit& f) {
  return json{{"slope", f.slope}, {"intercept", f.intercept}, {"rms_residual", f.rms_residual}, {"n", f.n}};
}

json fits_json(const JointFits& f) {
  return json{{"theta2", fit_json(f.theta2)}, {"theta4", fit_json(f.theta4)}, {"depth", fit_json(f.depth)}};
}

}  // namespace

json sensitivity_to_json(const SensitivityResult& r) {
  json j;
  j["kind"] = to_string(r.kind);
  j["axis"] = r.axis;
  j["units"] = r.kind == ErrorKind::InstrTrocarOffset ? "mm" : "deg";
  j["targets"] = json::array();
  for (const auto& t : r.targets) j["targets"].push_back(spherical_to_json(t));
  j["rows"] = json::array();
  for (const auto& row : r.rows) j["rows"].push_back(sensitivity_row_to_json(row));
  j["fit"] = fits_json(r.aggregate_fit);
  j["per_target_fit"] = json::array();
  for (const auto& f : r.per_target_fit) j["per_target_fit"].push_back(fits_json(f));
  j["excluded_points"] = r.excluded_points;
  return j;
}

std::string sensitivity_to_csv(const SensitivityResult& r) {
  std::ostringstream ss;
  ss << std::setprecision(10);
  ss << "kind,axis,magnitude,target,polar_deg,azimuth_deg,d_theta2_deg,d_theta4_deg,d_depth_mm,feasible\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.per_target.size(); ++i) {
      const auto& d = row.per_target[i];
      ss << to_string(r.kind) << ',' << r.axis << ',' << row.magnitude << ',' << i << ','
         << r.targets[i].polar_deg << ',' << r.targets[i].azimuth_deg << ',' << d.theta2_deg << ','
         << d.theta4_deg << ',' << d.depth_mm << ',' << (d.feasible ? 1 : 0) << '\n';
    }
    const auto& a = row.aggregate;
    ss << to_string(r.kind) << ',' << r.axis << ',' << row.magnitude << ",mean,,," << a.theta2_deg
       << ',' << a.theta4_deg << ',' << a.depth_mm << ',' << (a.feasible ? 1 : 0) << '\n';
  }
  return ss.str();
}

json monte_carlo_to_json(const MonteCarloResult& r) {
  auto st = [](const SampleStats& s) { return json{{"mean", s.mean}, {"sd", s.sd}}; };
  return json{{"rng", r.rng},
              {"seed", r.seed},
              {"n_trials", r.n_trials},
              {"n_samples", r.n_samples},
              {"n_excluded", r.n_excluded},
              {"d_theta2_deg", st(r.theta2)},
              {"d_theta4_deg", st(r.theta4)},
              {"d_depth_mm", st(r.depth)}};
}

}  // namespace retina
