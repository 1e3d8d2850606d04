#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "retina/errors.hpp"
#include "retina/workflow.hpp"

namespace retina {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  throw PlanningError(ErrorCode::SceneInvalid, path + ": " + what);
}

// Typed access to one JSON object with path-qualified errors.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_, "expected object");
  }

  void only(std::initializer_list<const char*> allowed) const {
    for (const auto& [key, _] : j_.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        invalid(path_ + "." + key, "unknown field");
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  double num(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    return num(key);
  }

  double num(const char* key) const {
    if (!has(key)) invalid(at(key), "required number missing");
    const json& v = j_.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) invalid(at(key), "expected finite number");
    return v.get<double>();
  }

  int integer(const char* key, int fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) invalid(at(key), "expected integer");
    return v.get<int>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) invalid(at(key), "expected boolean");
    return v.get<bool>();
  }

  std::string str(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) invalid(at(key), "expected string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key, std::size_t n) const {
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != n) invalid(at(key), "expected array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) invalid(at(key), "expected finite numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  const json& sub(const char* key) const { return j_.at(key); }
  std::string at(const char* key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
};

SphericalPoint polar_from_fields(const Fields& f) {
  SphericalPoint p{f.num("polar_deg"), f.num("azimuth_deg")};
  if (p.polar_deg < 0.0 || p.polar_deg > 180.0) invalid(f.at("polar_deg"), "must lie in [0, 180]");
  return p.normalized();
}

TargetSpec target_from_fields(const json& j, const std::string& path) {
  Fields f(j, path);
  f.only({"x_px", "y_px", "polar_deg", "azimuth_deg"});
  TargetSpec t;
  const bool px = f.has("x_px") || f.has("y_px");
  const bool polar = f.has("polar_deg") || f.has("azimuth_deg");
  if (px == polar) invalid(path, "give either x_px/y_px or polar_deg/azimuth_deg");
  if (px) {
    t.raster_px = Eigen::Vector2d(f.num("x_px"), f.num("y_px"));
  } else {
    t.polar = polar_from_fields(f);
  }
  return t;
}

// Maps engine argument errors raised during validation onto SceneInvalid.
template <typename Fn>
void validated(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const PlanningError& e) {
    if (e.code() == ErrorCode::SceneInvalid) throw;
    invalid(path, e.what());
  }
}

}  // namespace

TargetSpec target_spec_from_json(const json& j) {
  try {
    return target_from_fields(j, "target");
  } catch (const PlanningError& e) {
    throw PlanningError(ErrorCode::InvalidArgument, e.what());
  }
}

json target_spec_to_json(const TargetSpec& t) {
  if (t.raster_px) return json{{"x_px", t.raster_px->x()}, {"y_px", t.raster_px->y()}};
  return spherical_to_json(t.polar.value_or(SphericalPoint{}));
}

Scene scene_from_json(const json& j, const fs::path& base_dir, bool check_files) {
  Scene s;
  s.base_dir = base_dir;
  Fields top(j, "scene");
  top.only({"schema_version", "name", "eye", "trocars", "robot", "microscope", "fundus", "flags",
            "axis_compensation", "targets", "center", "executed_tilt"});
  s.schema_version = top.integer("schema_version", kSceneSchemaVersion);
  if (s.schema_version != kSceneSchemaVersion) {
    invalid("scene.schema_version", "unsupported version " + std::to_string(s.schema_version));
  }
  s.name = top.str("name", "");

  PlannerConfig& c = s.config;
  if (top.has("eye")) {
    Fields f(top.sub("eye"), "scene.eye");
    f.only({"radius_mm", "center_mm", "tilt_limit_deg"});
    c.eye.radius_mm = f.num("radius_mm", c.eye.radius_mm);
    if (f.has("center_mm")) {
      const auto v = f.numbers("center_mm", 3);
      c.eye.center = Vec3(v[0], v[1], v[2]);
    }
    c.eye.tilt_limit_deg = f.num("tilt_limit_deg", c.eye.tilt_limit_deg);
    validated("scene.eye", [&] { c.eye.validate(); });
  }
  if (top.has("trocars")) {
    Fields f(top.sub("trocars"), "scene.trocars");
    f.only({"side", "ring_polar_deg", "azimuth_offsets_deg"});
    validated("scene.trocars.side", [&] {
      c.trocars.side = trocar_side_from_string(f.str("side", to_string(c.trocars.side)));
    });
    c.trocars.ring_polar_deg = f.num("ring_polar_deg", c.trocars.ring_polar_deg);
    if (!(c.trocars.ring_polar_deg > 0.0 && c.trocars.ring_polar_deg < 90.0)) {
      invalid("scene.trocars.ring_polar_deg", "must lie in (0, 90)");
    }
    if (f.has("azimuth_offsets_deg")) {
      const auto v = f.numbers("azimuth_offsets_deg", 3);
      c.trocars.azimuth_offsets_deg = {v[0], v[1], v[2]};
    }
  }
  if (top.has("robot")) {
    Fields f(top.sub("robot"), "scene.robot");
    f.only({"pcjm", "theta4_limit_deg", "theta_ini_band_deg", "instrument_length_mm"});
    if (f.has("pcjm")) {
      Fields p(f.sub("pcjm"), "scene.robot.pcjm");
      p.only({"stroke_mm", "sweep_step_mm", "effective_length_mm"});
      c.pcjm.stroke_mm = p.num("stroke_mm", c.pcjm.stroke_mm);
      c.pcjm.sweep_step_mm = p.num("sweep_step_mm", c.pcjm.sweep_step_mm);
      c.pcjm.effective_length_mm = p.num("effective_length_mm", c.pcjm.effective_length_mm);
      validated("scene.robot.pcjm", [&] { c.pcjm.validate(); });
    }
    c.theta4_limit_deg = f.num("theta4_limit_deg", c.theta4_limit_deg);
    if (!(c.theta4_limit_deg > 0.0 && c.theta4_limit_deg <= 90.0)) {
      invalid("scene.robot.theta4_limit_deg", "must lie in (0, 90]");
    }
    if (f.has("theta_ini_band_deg")) {
      const auto v = f.numbers("theta_ini_band_deg", 2);
      if (!(v[0] < v[1])) invalid("scene.robot.theta_ini_band_deg", "min must be below max");
      c.theta_ini_band = ThetaIniBand{v[0], v[1]};
    }
    c.instrument_length_mm = f.num("instrument_length_mm", c.instrument_length_mm);
    if (!(c.instrument_length_mm > 0.0)) invalid("scene.robot.instrument_length_mm", "must be positive");
  }
  if (top.has("microscope")) {
    Fields f(top.sub("microscope"), "scene.microscope");
    f.only({"view_angle_deg"});
    c.view_angle_deg = f.num("view_angle_deg", c.view_angle_deg);
    if (!(c.view_angle_deg > 0.0 && c.view_angle_deg < 180.0)) {
      invalid("scene.microscope.view_angle_deg", "must lie in (0, 180)");
    }
  }
  if (top.has("fundus")) {
    Fields f(top.sub("fundus"), "scene.fundus");
    f.only({"image", "center_px", "diameter_px"});
    FundusRef r;
    r.image = f.str("image", "");
    if (r.image.empty()) invalid("scene.fundus.image", "required");
    if (f.has("center_px") != f.has("diameter_px")) {
      invalid("scene.fundus", "center_px and diameter_px go together");
    }
    if (f.has("center_px")) {
      const auto v = f.numbers("center_px", 2);
      r.center_px = Eigen::Vector2d(v[0], v[1]);
      r.diameter_px = f.num("diameter_px");
      if (!(*r.diameter_px > 0.0)) invalid("scene.fundus.diameter_px", "must be positive");
    }
    if (check_files) {
      const fs::path p = fs::path(r.image).is_absolute() ? fs::path(r.image) : base_dir / r.image;
      if (!fs::exists(p)) invalid("scene.fundus.image", "file not found: " + p.string());
    }
    s.fundus = r;
  }
  if (top.has("flags")) {
    Fields f(top.sub("flags"), "scene.flags");
    f.only({"apply_axis_compensation"});
    s.apply_axis_compensation = f.boolean("apply_axis_compensation", false);
  }
  if (top.has("axis_compensation")) {
    Fields f(top.sub("axis_compensation"), "scene.axis_compensation");
    f.only({"kappa_deg", "nodal_offset_mm"});
    s.kappa_deg = f.num("kappa_deg", s.kappa_deg);
    s.nodal_offset_mm = f.num("nodal_offset_mm", s.nodal_offset_mm);
    if (!(s.nodal_offset_mm > 0.0)) invalid("scene.axis_compensation.nodal_offset_mm", "must be positive");
  }
  if (top.has("targets")) {
    const json& arr = top.sub("targets");
    if (!arr.is_array()) invalid("scene.targets", "expected array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      s.targets.push_back(target_from_fields(arr[i], "scene.targets[" + std::to_string(i) + "]"));
    }
  }
  if (top.has("center")) {
    Fields f(top.sub("center"), "scene.center");
    f.only({"polar_deg", "azimuth_deg"});
    s.center = polar_from_fields(f);
  }
  if (top.has("executed_tilt")) {
    Fields f(top.sub("executed_tilt"), "scene.executed_tilt");
    f.only({"alpha_deg", "beta_deg"});
    s.executed_tilt = ExecutedTilt{f.num("alpha_deg"), f.num("beta_deg")};
  }
  for (const auto& t : s.targets) {
    if (t.raster_px && !s.fundus) invalid("scene.targets", "pixel targets need a fundus image");
  }
  return s;
}

json scene_to_json(const Scene& s) {
  const PlannerConfig& c = s.config;
  json j;
  j["schema_version"] = s.schema_version;
  j["name"] = s.name;
  j["eye"] = {{"radius_mm", c.eye.radius_mm},
              {"center_mm", vec3_to_json(c.eye.center)},
              {"tilt_limit_deg", c.eye.tilt_limit_deg}};
  j["trocars"] = {{"side", to_string(c.trocars.side)},
                  {"ring_polar_deg", c.trocars.ring_polar_deg},
                  {"azimuth_offsets_deg", c.trocars.azimuth_offsets_deg}};
  j["robot"] = {{"pcjm",
                 {{"stroke_mm", c.pcjm.stroke_mm},
                  {"sweep_step_mm", c.pcjm.sweep_step_mm},
                  {"effective_length_mm", c.pcjm.effective_length_mm}}},
                {"theta4_limit_deg", c.theta4_limit_deg},
                {"theta_ini_band_deg", {c.theta_ini_band.min_deg, c.theta_ini_band.max_deg}},
                {"instrument_length_mm", c.instrument_length_mm}};
  j["microscope"] = {{"view_angle_deg", c.view_angle_deg}};
  if (s.fundus) {
    json f{{"image", s.fundus->image}};
    if (s.fundus->center_px) {
      f["center_px"] = {s.fundus->center_px->x(), s.fundus->center_px->y()};
      f["diameter_px"] = *s.fundus->diameter_px;
    }
    j["fundus"] = f;
  }
  j["flags"] = {{"apply_axis_compensation", s.apply_axis_compensation}};
  j["axis_compensation"] = {{"kappa_deg", s.kappa_deg}, {"nodal_offset_mm", s.nodal_offset_mm}};
  j["targets"] = json::array();
  for (const auto& t : s.targets) j["targets"].push_back(target_spec_to_json(t));
  if (s.center) j["center"] = spherical_to_json(*s.center);
  if (s.executed_tilt) {
    j["executed_tilt"] = {{"alpha_deg", s.executed_tilt->alpha_deg}, {"beta_deg", s.executed_tilt->beta_deg}};
  }
  return j;
}

Scene load_scene(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const PlanningError&) {
    invalid(path.string(), "cannot read scene file");
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(path.string(), std::string("malformed JSON: ") + e.what());
  }
  return scene_from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

void save_scene(const Scene& s, const fs::path& path) {
  write_text_file(path, scene_to_json(s).dump(2) + "\n");
}

FundusImageMeta resolve_fundus(const Scene& s) {
  if (!s.fundus) invalid("scene.fundus", "no fundus image configured");
  const fs::path p = fs::path(s.fundus->image).is_absolute() ? fs::path(s.fundus->image)
                                                              : s.base_dir / s.fundus->image;
  const GrayImage img = read_image(p);
  if (s.fundus->center_px) {
    return make_fundus_meta(img.width, img.height, s.config.view_angle_deg, *s.fundus->center_px,
                            *s.fundus->diameter_px, s.config.eye);
  }
  return detect_fundus_boundary(img, s.config.view_angle_deg, s.config.eye);
}

PlanTarget resolve_target(const TargetSpec& t, const Scene& s,
                          const std::optional<FundusImageMeta>& meta) {
  if (t.polar) return polar_target(*t.polar, s.config.eye);
  if (!t.raster_px) throw PlanningError(ErrorCode::InvalidArgument, "empty target");
  if (!meta) throw PlanningError(ErrorCode::SceneInvalid, "pixel target without fundus calibration");
  PlanTarget out;
  out.source = "pixel";
  out.pixel = PixelTarget::from_raster(t.raster_px->x(), t.raster_px->y(), *meta);
  SphericalPoint p = pixel_to_polar(*out.pixel, *meta, s.config.eye);
  if (s.apply_axis_compensation) {
    const AxisCompensation comp = AxisCompensation::derive(s.kappa_deg, s.nodal_offset_mm, s.config.eye);
    p = compensate_visual_axis(p, comp, s.config.eye);
    out.compensated = true;
  }
  out.polar = p;
  out.position = spherical_to_cartesian(p, s.config.eye);
  return out;
}

std::vector<PlanTarget> resolve_targets(const std::vector<TargetSpec>& specs, const Scene& s) {
  std::optional<FundusImageMeta> meta;
  const bool need_meta = std::any_of(specs.begin(), specs.end(), [](const TargetSpec& t) { return t.raster_px.has_value(); });
  if (need_meta) meta = resolve_fundus(s);
  std::vector<PlanTarget> out;
  for (const auto& t : specs) out.push_back(resolve_target(t, s, meta));
  return out;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlanningError(ErrorCode::NotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PlanningError(ErrorCode::InvalidArgument, "cannot write " + path.string());
    out << text;
  }
  fs::rename(tmp, path);
}

}  // namespace retina
