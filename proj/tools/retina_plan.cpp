#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "retina/errorlab.hpp"
#include "retina/errors.hpp"
#include "retina/fundus.hpp"
#include "retina/service.hpp"
#include "retina/workflow.hpp"

using namespace retina;

namespace {

std::pair<double, double> parse_pair(const std::string& s, const char* what) {
  std::istringstream in(s);
  double a = 0.0, b = 0.0;
  char comma = 0;
  if (!(in >> a >> comma >> b) || comma != ',' || !in.eof()) {
    throw PlanningError(ErrorCode::InvalidArgument, std::string("bad ") + what + " '" + s + "', expected a,b");
  }
  return {a, b};
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preoperative planner for robot-assisted vitreoretinal surgery"};
  app.require_subcommand(1);

  // plan
  auto* plan = app.add_subcommand("plan", "Plan eye tilt, trocar, robot tilt and joint targets");
  std::string scene_path, out_path, overlay_path;
  std::vector<std::string> target_px, target_polar;
  std::string executed_tilt;
  int forced_trocar = -1;
  plan->add_option("--scene", scene_path, "Scene JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--target-px", target_px, "Raster click col,row (repeatable)");
  plan->add_option("--target-polar", target_polar, "Polar target polar,azimuth in degrees (repeatable)");
  plan->add_option("--executed-tilt", executed_tilt, "Tilt applied by hand alpha,beta; replans downstream");
  plan->add_option("--trocar", forced_trocar, "Force trocar index 0..2")->check(CLI::Range(0, 2));
  plan->add_option("--out", out_path, "Plan record output (default stdout)");
  plan->add_option("--export-overlay", overlay_path, "Accessibility overlay JSON output");

  // serve
  auto* srv = app.add_subcommand("serve", "Run the HTTP API");
  int port = 8080;
  std::string host = "127.0.0.1", workspace;
  srv->add_option("--port", port)->check(CLI::Range(1, 65535));
  srv->add_option("--host", host);
  srv->add_option("--workspace", workspace, "Workspace directory (RETINA_PLAN_WORKSPACE overrides)");

  // errorlab
  auto* lab = app.add_subcommand("errorlab", "Error sensitivity analysis");
  lab->require_subcommand(1);
  auto* run = lab->add_subcommand("run", "Sweep one error source and fit slopes");
  std::string lab_scene, kind_name, axis, csv_path, lab_out;
  std::vector<double> magnitudes;
  run->add_option("--scene", lab_scene, "Scene JSON (robot and eye setup)")->check(CLI::ExistingFile);
  run->add_option("--kind", kind_name, "z_align|instr_trocar_offset|trocar_roll|trocar_yaw|eye_pose")->required();
  run->add_option("--axis", axis, "x|y|both");
  run->add_option("--magnitudes", magnitudes, "Override the magnitude list")->delimiter(',');
  run->add_option("--out", lab_out, "Result JSON (default stdout)");
  run->add_option("--csv", csv_path, "Also write a CSV table");

  auto* mc = lab->add_subcommand("montecarlo", "Combined random errors");
  std::string mc_scene, mc_out;
  std::vector<std::string> sds;
  int trials = 1000, threads = 1;
  std::uint64_t seed = 1;
  mc->add_option("--scene", mc_scene, "Scene JSON")->check(CLI::ExistingFile);
  mc->add_option("--sd", sds, "kind=sd[:axis], repeatable")->required();
  mc->add_option("--trials", trials)->check(CLI::PositiveNumber);
  mc->add_option("--seed", seed);
  mc->add_option("--threads", threads)->check(CLI::PositiveNumber);
  mc->add_option("--out", mc_out);

  // detect / render
  auto* det = app.add_subcommand("detect", "Detect the fundus boundary in an image");
  std::string image_path;
  double view_angle = 60.0;
  det->add_option("--image", image_path)->required()->check(CLI::ExistingFile);
  det->add_option("--view-angle", view_angle);

  auto* ren = app.add_subcommand("render", "Render a synthetic fundus image (PGM)");
  SyntheticFundusOptions ro;
  std::string render_out;
  ren->add_option("--out", render_out)->required();
  ren->add_option("--width", ro.width);
  ren->add_option("--height", ro.height);
  ren->add_option("--diameter", ro.diameter_px);
  ren->add_option("--axis-ratio", ro.axis_ratio);
  ren->add_option("--speckle", ro.speckle_fraction);
  ren->add_option("--seed", ro.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0; usage errors share the runtime error code.
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*plan) {
      const Scene scene = load_scene(scene_path);
      PlanInputs in;
      for (const auto& s : target_px) {
        const auto [c, r] = parse_pair(s, "--target-px");
        in.targets.push_back(TargetSpec{Eigen::Vector2d(c, r), std::nullopt});
      }
      for (const auto& s : target_polar) {
        const auto [p, a] = parse_pair(s, "--target-polar");
        in.targets.push_back(TargetSpec{std::nullopt, SphericalPoint{p, a}.normalized()});
      }
      if (!executed_tilt.empty()) {
        const auto [a, b] = parse_pair(executed_tilt, "--executed-tilt");
        in.executed_tilt = ExecutedTilt{a, b};
      }
      in.forced_trocar = forced_trocar;
      const PlanOutcome o = plan_scene(scene, in);
      emit(o.record.dump(2) + "\n", out_path);
      if (!overlay_path.empty()) {
        const auto sample = overlay_for_plan(scene.config, o.result);
        write_text_file(overlay_path, overlay_to_json(sample, o.result).dump() + "\n");
      }
      if (!out_path.empty()) {
        std::fprintf(stderr, "plan %s: %s\n", o.record.at("plan_id").get<std::string>().substr(0, 12).c_str(),
                     o.result.feasible ? "feasible" : "has infeasible targets");
      }
    } else if (*srv) {
      Workspace ws(Workspace::resolve_root(workspace));
      std::fprintf(stderr, "serving %s on http://%s:%d\n", ws.root().c_str(), host.c_str(), port);
      if (!serve(ws, host, port)) {
        std::fprintf(stderr, "cannot listen on %s:%d\n", host.c_str(), port);
        return 1;
      }
    } else if (*run) {
      const PlannerConfig config = lab_scene.empty() ? PlannerConfig{} : load_scene(lab_scene).config;
      ErrorScenario s = default_scenario(error_kind_from_string(kind_name));
      if (!axis.empty()) s.axis = axis;
      if (!magnitudes.empty()) s.magnitudes = magnitudes;
      const SensitivityResult r = run_scenario(s, config);
      emit(sensitivity_to_json(r).dump(2) + "\n", lab_out);
      if (!csv_path.empty()) write_text_file(csv_path, sensitivity_to_csv(r));
    } else if (*mc) {
      const PlannerConfig config = mc_scene.empty() ? PlannerConfig{} : load_scene(mc_scene).config;
      const ErrorScenario s = default_scenario(ErrorKind::ZAlign);
      PlanRequest req;
      for (const auto& t : s.targets) req.targets.push_back(polar_target(t, config.eye));
      req.center = s.center;
      const PlanResult p = plan_targets(config, req);
      std::vector<ErrorDistribution> dists;
      for (const auto& spec : sds) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw PlanningError(ErrorCode::InvalidArgument, "bad --sd " + spec);
        ErrorDistribution d;
        d.kind = error_kind_from_string(spec.substr(0, eq));
        std::string rest = spec.substr(eq + 1);
        if (const auto colon = rest.find(':'); colon != std::string::npos) {
          d.axis = rest.substr(colon + 1);
          rest = rest.substr(0, colon);
        } else if (d.kind == ErrorKind::InstrTrocarOffset) {
          d.axis = "x";
        }
        d.sd = std::stod(rest);
        dists.push_back(d);
      }
      const auto r = monte_carlo(config, p, dists, MonteCarloOptions{trials, seed, threads});
      emit(monte_carlo_to_json(r).dump(2) + "\n", mc_out);
    } else if (*det) {
      const GrayImage img = read_image(image_path);
      const CircleFit fit = detect_circle(img);
      const FundusImageMeta meta = make_fundus_meta(img.width, img.height, view_angle, fit.center_px,
                                                    fit.diameter_px, EyeModel{});
      const json j{{"center_px", {fit.center_px.x(), fit.center_px.y()}},
                   {"diameter_px", fit.diameter_px},
                   {"axis_ratio", fit.axis_ratio},
                   {"support", fit.support},
                   {"mm_per_px", meta.mm_per_px}};
      std::cout << j.dump(2) << "\n";
    } else if (*ren) {
      ro.center_px = Eigen::Vector2d((ro.width - 1) / 2.0, (ro.height - 1) / 2.0);
      write_pgm(render_synthetic_fundus(ro), render_out);
    }
  } catch (const PlanningError& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
