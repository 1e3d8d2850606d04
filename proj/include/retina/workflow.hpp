#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "retina/accessibility.hpp"
#include "retina/errorlab.hpp"
#include "retina/fundus.hpp"
#include "retina/planner.hpp"

namespace retina {

using json = nlohmann::json;

inline constexpr const char* kEngineVersion = "0.1.0";
inline constexpr int kSceneSchemaVersion = 1;
inline constexpr int kPlanSchemaVersion = 1;

struct FundusRef {
  std::string image;  // relative paths resolve against Scene::base_dir
  std::optional<Eigen::Vector2d> center_px;  // manual boundary, skips detection
  std::optional<double> diameter_px;
};

/// A target as the operator supplied it: a raster click (col, row) or a
/// direct polar coordinate.
struct TargetSpec {
  std::optional<Eigen::Vector2d> raster_px;
  std::optional<SphericalPoint> polar;
};

struct Scene {
  int schema_version = kSceneSchemaVersion;
  std::string name;
  PlannerConfig config;
  std::optional<FundusRef> fundus;
  bool apply_axis_compensation = false;
  double kappa_deg = 5.0;
  double nodal_offset_mm = 16.4;
  std::vector<TargetSpec> targets;
  std::optional<SphericalPoint> center;
  std::optional<ExecutedTilt> executed_tilt;
  std::filesystem::path base_dir;  // not serialized
};

/// Parses and validates a scene document. Throws SceneInvalid with a path
/// to the offending field; referenced files must exist when `check_files`.
Scene scene_from_json(const json& j, const std::filesystem::path& base_dir, bool check_files = true);
json scene_to_json(const Scene& s);
Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& s, const std::filesystem::path& path);

TargetSpec target_spec_from_json(const json& j);
json target_spec_to_json(const TargetSpec& t);

/// Fundus calibration for the scene: manual centre/diameter when given,
/// otherwise boundary detection on the image. Throws SceneInvalid when the
/// scene has no fundus image and ImageUnreadable for a bad file.
FundusImageMeta resolve_fundus(const Scene& s);

/// Converts operator targets into planner targets. `meta` is needed only
/// for pixel targets.
PlanTarget resolve_target(const TargetSpec& t, const Scene& s, const std::optional<FundusImageMeta>& meta);
std::vector<PlanTarget> resolve_targets(const std::vector<TargetSpec>& specs, const Scene& s);

struct PlanInputs {
  std::vector<TargetSpec> targets;  // empty: use the scene's own list
  std::optional<SphericalPoint> center;
  std::optional<ExecutedTilt> executed_tilt;
  int forced_trocar = -1;
};

PlanInputs plan_inputs_from_json(const json& j);
json plan_inputs_to_json(const PlanInputs& in);

struct PlanOutcome {
  PlanResult result;
  std::optional<FundusImageMeta> fundus;
  json record;
};

/// Resolves targets and runs the pipeline. The record carries the inputs,
/// every intermediate quantity and an input hash used as the plan id.
PlanOutcome plan_scene(const Scene& s, const PlanInputs& in, const std::string& scene_id = "");

/// Angles and lengths are written with 6 decimals.
double round6(double v);

json spherical_to_json(const SphericalPoint& p);
SphericalPoint spherical_from_json(const json& j);
json vec3_to_json(const Vec3& v);
json plan_target_to_json(const PlanTarget& t);
json plan_record_json(const Scene& s, const PlanInputs& in, const PlanOutcome& o,
                      const std::string& scene_id);

std::string sha256_hex(const std::string& data);
/// Hash of the record with the timestamp removed.
std::string record_digest(const json& record);
std::string iso_timestamp_utc();

json overlay_to_json(const RetinalRegionSample& s, const PlanResult& plan);
/// Accessibility overlay for a plan's context.
RetinalRegionSample overlay_for_plan(const PlannerConfig& config, const PlanResult& plan,
                                     const RegionGridSpec& spec = {});

json joint_delta_to_json(const JointDelta& d);
json sensitivity_row_to_json(const SensitivityRow& r);
json sensitivity_to_json(const SensitivityResult& r);
std::string sensitivity_to_csv(const SensitivityResult& r);
json monte_carlo_to_json(const MonteCarloResult& r);

/// Writes text atomically (temp file + rename).
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace retina
