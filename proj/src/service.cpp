#include "retina/service.hpp"

#include <cstdlib>
#include <regex>

#include "httplib.h"

namespace retina {

namespace fs = std::filesystem;

Workspace::Workspace(fs::path root) : root_(fs::absolute(std::move(root))) {
  fs::create_directories(root_ / "scenes");
  fs::create_directories(root_ / "plans");
}

fs::path Workspace::resolve_root(const std::string& cli_value) {
  if (const char* env = std::getenv("RETINA_PLAN_WORKSPACE"); env && *env) return fs::path(env);
  return fs::path(cli_value.empty() ? "./ws" : cli_value);
}

fs::path Workspace::scene_dir(const std::string& id) const { return root_ / "scenes" / id; }

fs::path Workspace::plan_path(const std::string& plan_id) const {
  return root_ / "plans" / (plan_id + ".json");
}

std::shared_ptr<std::mutex> Workspace::scene_mutex(const std::string& id) {
  std::lock_guard<std::mutex> lock(registry_mutex_);
  auto& m = scene_mutexes_[id];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

Scene Workspace::normalized_scene(const json& scene_json) const {
  Scene s = scene_from_json(scene_json, root_);
  if (s.fundus && !fs::path(s.fundus->image).is_absolute()) {
    s.fundus->image = fs::weakly_canonical(root_ / s.fundus->image).string();
  }
  return s;
}

Workspace::Entry Workspace::read_entry(const std::string& id) const {
  static const std::regex valid_id("scene-[0-9]{4,}");
  const fs::path dir = scene_dir(id);
  if (!std::regex_match(id, valid_id) || !fs::exists(dir / "scene.json")) {
    throw PlanningError(ErrorCode::NotFound, "no scene " + id);
  }
  Entry e;
  e.id = id;
  e.version = json::parse(read_text_file(dir / "meta.json")).at("version").get<int>();
  e.scene = scene_from_json(json::parse(read_text_file(dir / "scene.json")), root_);
  return e;
}

std::string Workspace::create_scene(const json& scene_json) {
  const Scene s = normalized_scene(scene_json);
  std::lock_guard<std::mutex> lock(registry_mutex_);
  int next = 1;
  for (const auto& d : fs::directory_iterator(root_ / "scenes")) {
    const std::string name = d.path().filename().string();
    if (name.rfind("scene-", 0) == 0) next = std::max(next, std::atoi(name.c_str() + 6) + 1);
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene-%04d", next);
  const std::string id = buf;
  save_scene(s, scene_dir(id) / "scene.json");
  write_text_file(scene_dir(id) / "meta.json", json{{"version", 1}}.dump() + "\n");
  return id;
}

Workspace::Entry Workspace::get_scene(const std::string& id) {
  auto m = scene_mutex(id);
  std::lock_guard<std::mutex> lock(*m);
  return read_entry(id);
}

int Workspace::update_scene(const std::string& id, int expected_version, const json& scene_json) {
  auto m = scene_mutex(id);
  std::lock_guard<std::mutex> lock(*m);
  const Entry e = read_entry(id);
  if (e.version != expected_version) {
    throw PlanningError(ErrorCode::Conflict, "scene " + id + " is at version " + std::to_string(e.version));
  }
  const Scene s = normalized_scene(scene_json);
  save_scene(s, scene_dir(id) / "scene.json");
  write_text_file(scene_dir(id) / "meta.json", json{{"version", e.version + 1}}.dump() + "\n");
  return e.version + 1;
}

json Workspace::reconstruct_target(const std::string& id, const TargetSpec& t) {
  const Entry e = get_scene(id);
  std::optional<FundusImageMeta> meta;
  if (t.raster_px) meta = resolve_fundus(e.scene);
  json j = plan_target_to_json(resolve_target(t, e.scene, meta));
  j["input"] = target_spec_to_json(t);
  return j;
}

json Workspace::plan(const std::string& id, const PlanInputs& in) {
  const Entry e = get_scene(id);
  PlanOutcome o = plan_scene(e.scene, in, id);
  write_text_file(plan_path(o.record.at("plan_id").get<std::string>()), o.record.dump(2) + "\n");
  return o.record;
}

PlanOutcome Workspace::plan_default(const Entry& e) const {
  PlanInputs in;
  if (e.scene.targets.empty()) in.targets.push_back(TargetSpec{std::nullopt, SphericalPoint{180.0, 0.0}});
  return plan_scene(e.scene, in, e.id);
}

json Workspace::overlay(const std::string& id, const RegionGridSpec& spec) {
  const Entry e = get_scene(id);
  const PlanOutcome o = plan_default(e);
  return overlay_to_json(overlay_for_plan(e.scene.config, o.result, spec), o.result);
}

json Workspace::whatif(const std::string& id, ErrorKind kind, double magnitude, const std::string& axis) {
  const Entry e = get_scene(id);
  const PlanOutcome o = plan_default(e);
  json j = sensitivity_row_to_json(sensitivity_row(e.scene.config, o.result, kind, magnitude, axis));
  j["kind"] = to_string(kind);
  j["axis"] = axis;
  j["plan_id"] = o.record.at("plan_id");
  return j;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict: return 409;
    case ErrorCode::InvalidArgument:
    case ErrorCode::SceneInvalid: return 400;
    default: return 422;
  }
}

json error_body(ErrorCode code, const std::string& message) {
  return json{{"error", {{"code", to_string(code)}, {"message", message}}}};
}

namespace {

using Handler = std::function<json(const httplib::Request&, httplib::Response&)>;

httplib::Server::Handler wrap(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      res.status = 200;
      const json body = h(req, res);
      res.set_content(body.dump(2), "application/json");
    } catch (const PlanningError& e) {
      res.status = http_status(e.code());
      res.set_content(error_body(e.code(), e.what()).dump(2), "application/json");
    } catch (const json::exception& e) {
      res.status = 400;
      res.set_content(error_body(ErrorCode::InvalidArgument, e.what()).dump(2), "application/json");
    } catch (const std::invalid_argument& e) {
      res.status = 400;
      res.set_content(error_body(ErrorCode::InvalidArgument, e.what()).dump(2), "application/json");
    }
  };
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw PlanningError(ErrorCode::InvalidArgument, std::string("malformed JSON body: ") + e.what());
  }
}

}  // namespace

void install_routes(httplib::Server& server, Workspace& ws) {
  server.Post("/scenes", wrap([&ws](const httplib::Request& req, httplib::Response& res) {
                const std::string id = ws.create_scene(parse_body(req));
                res.status = 201;
                return json{{"id", id}, {"version", 1}};
              }));

  server.Get(R"(/scenes/([^/]+))", wrap([&ws](const httplib::Request& req, httplib::Response&) {
               const auto e = ws.get_scene(req.matches[1]);
               return json{{"id", e.id}, {"version", e.version}, {"scene", scene_to_json(e.scene)}};
             }));

  server.Put(R"(/scenes/([^/]+))", wrap([&ws](const httplib::Request& req, httplib::Response&) {
               const json body = parse_body(req);
               if (!body.is_object() || !body.contains("version") || !body.contains("scene")) {
                 throw PlanningError(ErrorCode::InvalidArgument, "body needs version and scene");
               }
               const int v = ws.update_scene(req.matches[1], body.at("version").get<int>(), body.at("scene"));
               return json{{"id", std::string(req.matches[1])}, {"version", v}};
             }));

  server.Post(R"(/scenes/([^/]+)/targets)", wrap([&ws](const httplib::Request& req, httplib::Response&) {
                return ws.reconstruct_target(req.matches[1], target_spec_from_json(parse_body(req)));
              }));

  server.Post(R"(/scenes/([^/]+)/plan)", wrap([&ws](const httplib::Request& req, httplib::Response&) {
                const json body = req.body.empty() ? json::object() : parse_body(req);
                return ws.plan(req.matches[1], plan_inputs_from_json(body));
              }));

  server.Get(R"(/scenes/([^/]+)/overlay)", wrap([&ws](const httplib::Request& req, httplib::Response&) {
               RegionGridSpec spec;
               if (req.has_param("polar_step")) spec.polar_step_deg = std::stod(req.get_param_value("polar_step"));
               if (req.has_param("azimuth_step")) spec.azimuth_step_deg = std::stod(req.get_param_value("azimuth_step"));
               return ws.overlay(req.matches[1], spec);
             }));

  server.Post(R"(/scenes/([^/]+)/whatif)", wrap([&ws](const httplib::Request& req, httplib::Response&) {
                const json body = parse_body(req);
                const ErrorKind kind = error_kind_from_string(body.at("kind").get<std::string>());
                const double magnitude = body.at("magnitude").get<double>();
                std::string axis = body.value("axis", std::string());
                if (axis.empty()) axis = kind == ErrorKind::InstrTrocarOffset ? "x" : "both";
                return ws.whatif(req.matches[1], kind, magnitude, axis);
              }));
}

bool serve(Workspace& ws, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, ws);
  return server.listen(host, port);
}

}  // namespace retina
