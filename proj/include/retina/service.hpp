#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "retina/errors.hpp"
#include "retina/workflow.hpp"

namespace httplib {
class Server;
}

namespace retina {

/// Flat-file store: scenes/<id>/scene.json + meta.json, plans/<plan_id>.json.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  /// RETINA_PLAN_WORKSPACE wins over the command-line value.
  static std::filesystem::path resolve_root(const std::string& cli_value);

  const std::filesystem::path& root() const { return root_; }

  struct Entry {
    std::string id;
    int version = 0;
    Scene scene;
  };

  /// Validates, stores and returns the new id. Relative image paths resolve
  /// against the workspace root and are stored absolute.
  std::string create_scene(const json& scene_json);
  Entry get_scene(const std::string& id);
  /// Optimistic update: throws Conflict unless `expected_version` matches.
  int update_scene(const std::string& id, int expected_version, const json& scene_json);

  json reconstruct_target(const std::string& id, const TargetSpec& t);
  json plan(const std::string& id, const PlanInputs& in);
  json overlay(const std::string& id, const RegionGridSpec& spec = {});
  json whatif(const std::string& id, ErrorKind kind, double magnitude, const std::string& axis);

  std::filesystem::path plan_path(const std::string& plan_id) const;

 private:
  std::filesystem::path scene_dir(const std::string& id) const;
  std::shared_ptr<std::mutex> scene_mutex(const std::string& id);
  Scene normalized_scene(const json& scene_json) const;
  Entry read_entry(const std::string& id) const;
  PlanOutcome plan_default(const Entry& e) const;

  std::filesystem::path root_;
  std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> scene_mutexes_;
};

int http_status(ErrorCode code);
json error_body(ErrorCode code, const std::string& message);

void install_routes(httplib::Server& server, Workspace& ws);

/// Blocks until the server stops.
bool serve(Workspace& ws, const std::string& host, int port);

}  // namespace retina
