#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "oracles.hpp"
#include "retina/accessibility.hpp"
#include "retina/errors.hpp"
#include "retina/planner.hpp"

using namespace retina;

namespace {

PlanResult plan_for(const SphericalPoint& p, const PlannerConfig& cfg = {}) {
  PlanRequest req;
  req.targets.push_back(polar_target(p, cfg.eye));
  return plan_targets(cfg, req);
}

// Setup for the same plan but with the RCM on another (tilted) trocar.
RobotSetup with_trocar(const PlanResult& plan, int k, const EyeModel& eye) {
  RobotSetup s = plan.setup;
  s.rcm_world = tilt_point(plan.layout.trocars[k].world, plan.tilt.alpha_deg, plan.tilt.beta_deg, eye);
  return s;
}

int count(const Mask& m) {
  int n = 0;
  for (auto v : m) n += v;
  return n;
}

Vec3 centroid(const Mask& m, const std::vector<SphericalPoint>& grid, const RegionGridSpec& spec,
              const EyeModel& eye) {
  Vec3 c;
  REQUIRE(mask_centroid(m, grid, cell_area_fractions(spec, grid), eye, c));
  return c;
}

}  // namespace

TEST_CASE("grid layout") {
  RegionGridSpec spec;
  const auto grid = make_region_grid(spec);
  CHECK(spec.polar_count() == 91);
  CHECK(spec.azimuth_count() == 180);
  REQUIRE(grid.size() == 91u * 180u);
  EyeModel eye;
  for (const auto& p : grid) {
    CHECK(p.azimuth_deg > -180.0);
    CHECK(p.azimuth_deg <= 180.0);
    CHECK(std::abs(spherical_to_cartesian(p, eye).norm() - eye.radius_mm) < 1e-12);
  }
  double total = 0;
  for (double w : cell_area_fractions(spec, grid)) total += w;
  CHECK(total == doctest::Approx(0.5).epsilon(1e-12));
  RegionGridSpec bad;
  bad.polar_step_deg = 0;
  CHECK_THROWS_AS(make_region_grid(bad), PlanningError);
}

TEST_CASE("zero tilt: a 30 degree cap about the posterior pole") {
  RegionGridSpec spec;
  const auto grid = make_region_grid(spec);
  EyeModel eye;
  const Mask vis = visible_mask(grid, 0, 0, 60, eye);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(static_cast<bool>(vis[i]) == (grid[i].polar_deg >= 150.0));
  }
  const double frac = mask_area_fraction(vis, cell_area_fractions(spec, grid));
  const double cap = (1.0 - std::cos(oracle::rad(30))) / 2.0;
  // The rim sits exactly on a grid row, so its cells add half a polar step.
  const double half_band = (std::cos(oracle::rad(30)) - std::cos(oracle::rad(30.5))) / 2.0;
  CHECK(frac >= cap);
  CHECK(frac - cap <= half_band * (1 + 1e-9));
}

TEST_CASE("a finer grid converges on the analytic cap area") {
  RegionGridSpec spec;
  spec.polar_step_deg = 0.25;
  spec.azimuth_step_deg = 0.5;
  const auto grid = make_region_grid(spec);
  EyeModel eye;
  const Mask vis = visible_mask(grid, 3, -2, 60, eye);
  const double frac = mask_area_fraction(vis, cell_area_fractions(spec, grid));
  const double cap = (1.0 - std::cos(oracle::rad(30))) / 2.0;
  CHECK(std::abs(frac - cap) / cap < 0.01);
}

TEST_CASE("tilting the eye moves the visible cap by twice the tilt") {
  RegionGridSpec spec;
  const auto grid = make_region_grid(spec);
  EyeModel eye;
  const auto w = cell_area_fractions(spec, grid);
  const double base = (1.0 - std::cos(oracle::rad(30))) / 2.0;
  for (double t : {2.5, 5.0, 10.0}) {
    for (auto [a, b] : {std::pair{t, 0.0}, std::pair{0.0, t}, std::pair{-t, 0.0}}) {
      const Mask vis = visible_mask(grid, a, b, 60, eye);
      const Vec3 c = centroid(vis, grid, spec, eye);
      CHECK(oracle::angle_between_deg(c, fov_center_vector(a, b, eye)) < 0.3);
      CHECK(oracle::angle_between_deg(c, Vec3(0, 0, -1)) == doctest::Approx(2 * t).epsilon(0.03));
      // Same size cap, just moved.
      CHECK(std::abs(mask_area_fraction(vis, w) - base) / base < 0.01);
    }
  }
}

TEST_CASE("straight-in axis point is accessible") {
  const PlannerConfig cfg;
  const auto plan = plan_for({180, 0});
  const Vec3 dir = plan.setup.frame.to_world(instrument_direction_robot(plan.setup.theta_ini_deg, 0, 0));
  const double d = line_sphere_depth(plan.setup.rcm_world, dir, cfg.eye);
  const Vec3 hit = plan.setup.rcm_world + d * dir;  // zero tilt, so world == body
  const Mask m = accessible_mask({cartesian_to_spherical(hit, cfg.eye)}, 0, 0, plan.setup, cfg.eye);
  CHECK(m[0] == 1);
}

TEST_CASE("a neighbouring trocar recovers points beyond the working angle") {
  const PlannerConfig cfg;
  const auto plan = plan_for({180, 0});
  RegionGridSpec spec;
  const auto grid = make_region_grid(spec);
  const Mask mid = accessible_mask(grid, 0, 0, with_trocar(plan, 1, cfg.eye), cfg.eye);
  const Mask left = accessible_mask(grid, 0, 0, with_trocar(plan, 0, cfg.eye), cfg.eye);
  const Mask right = accessible_mask(grid, 0, 0, with_trocar(plan, 2, cfg.eye), cfg.eye);
  int regained = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mid[i] || !(left[i] || right[i])) continue;
    const Vec3 p = spherical_to_cartesian(grid[i], cfg.eye);
    const auto j = solve_joint_target(p, plan.setup, cfg.eye);
    const bool theta2_limited = std::find(j.violations.begin(), j.violations.end(),
                                          "out_of_working_angle") != j.violations.end();
    if (theta2_limited) ++regained;
  }
  CHECK(regained > 50);
}

TEST_CASE("a larger theta4 limit never removes points") {
  const PlannerConfig cfg;
  RegionGridSpec spec;
  spec.polar_step_deg = 2;
  spec.azimuth_step_deg = 4;
  const auto grid = make_region_grid(spec);
  for (const SphericalPoint& target : {SphericalPoint{180, 0}, SphericalPoint{165, 40}, SphericalPoint{160, -120}}) {
    const auto plan = plan_for(target);
    RobotSetup narrow = plan.setup, wide = plan.setup;
    narrow.theta4_limit_deg = 15;
    wide.theta4_limit_deg = 30;
    const auto a = plan.tilt.alpha_deg, b = plan.tilt.beta_deg;
    const Mask mn = accessible_mask(grid, a, b, narrow, cfg.eye);
    const Mask mw = accessible_mask(grid, a, b, wide, cfg.eye);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK((!mn[i] || mw[i]));
    CHECK(count(mw) > count(mn));
  }
}

TEST_CASE("both is the elementwise AND") {
  const PlannerConfig cfg;
  const auto plan = plan_for({165, 60});
  RegionGridSpec spec;
  spec.polar_step_deg = 2;
  spec.azimuth_step_deg = 4;
  const auto s = sample_region(spec, plan.tilt.alpha_deg, plan.tilt.beta_deg, 60, plan.setup, cfg.eye);
  REQUIRE(s.both.size() == s.grid.size());
  int both = 0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    CHECK(s.both[i] == (s.visible[i] & s.accessible[i]));
    both += s.both[i];
  }
  CHECK(both > 0);
  CHECK_THROWS_AS(mask_and(Mask(3), Mask(4)), PlanningError);
}

TEST_CASE("planner and map agree on feasibility") {
  oracle::Gen g(5);
  const PlannerConfig cfg;
  int feasible = 0;
  for (int i = 0; i < 300; ++i) {
    const auto [p, az] = g.cap(130, 180);
    const auto plan = plan_for({p, az});
    const auto& tp = plan.per_target[0];
    const std::vector<SphericalPoint> one{SphericalPoint{p, az}};
    const Mask vis = visible_mask(one, plan.tilt.alpha_deg, plan.tilt.beta_deg, cfg.view_angle_deg, cfg.eye);
    const Mask acc = accessible_mask(one, plan.tilt.alpha_deg, plan.tilt.beta_deg, plan.setup, cfg.eye);
    if (tp.feasible) {
      ++feasible;
      CHECK(mask_and(vis, acc)[0] == 1);
    }
    CHECK(static_cast<bool>(vis[0]) == tp.visible);
    CHECK(static_cast<bool>(acc[0]) == tp.joints.within_limits);
  }
  CHECK(feasible > 100);
}

TEST_CASE("switching trocars moves the accessible region along robot X") {
  const PlannerConfig cfg;
  const auto plan = plan_for({180, 0});
  RegionGridSpec spec;
  const auto grid = make_region_grid(spec);
  const RobotFrame& f = plan.setup.frame;
  const Vec3 c1 = centroid(accessible_mask(grid, 0, 0, with_trocar(plan, 1, cfg.eye), cfg.eye), grid, spec, cfg.eye);
  for (int k : {0, 2}) {
    const Vec3 ck = centroid(accessible_mask(grid, 0, 0, with_trocar(plan, k, cfg.eye), cfg.eye), grid, spec, cfg.eye);
    const Vec3 shift = f.to_robot(ck - c1);
    const Vec3 trocar_shift = f.to_robot(plan.layout.trocars[k].world - plan.layout.trocars[1].world);
    CHECK(shift.x() * trocar_shift.x() > 0.0);
    CHECK(std::abs(shift.x()) > std::abs(shift.y()));
  }
}

TEST_CASE("a steeper robot tilt moves the accessible region toward robot -Y") {
  const PlannerConfig cfg;
  const auto plan = plan_for({180, 0});
  RegionGridSpec spec;
  const auto grid = make_region_grid(spec);
  RobotSetup lo = plan.setup, hi = plan.setup;
  lo.theta_ini_deg = 18;
  hi.theta_ini_deg = 28;
  const Vec3 cl = centroid(accessible_mask(grid, 0, 0, lo, cfg.eye), grid, spec, cfg.eye);
  const Vec3 ch = centroid(accessible_mask(grid, 0, 0, hi, cfg.eye), grid, spec, cfg.eye);
  const Vec3 shift = plan.setup.frame.to_robot(ch - cl);
  CHECK(shift.y() < 0.0);
  CHECK(std::abs(shift.y()) > std::abs(shift.x()));
}

TEST_CASE("run-length encoding round trips") {
  oracle::Gen g(9);
  for (int i = 0; i < 500; ++i) {
    Mask m(static_cast<std::size_t>(g.integer(0, 300)));
    const double p = g.uniform(0, 1);
    for (auto& v : m) v = g.uniform(0, 1) < p ? 1 : 0;
    const auto runs = rle_encode(m);
    CHECK(rle_decode(runs) == m);
    int total = 0;
    for (int r : runs) total += r;
    CHECK(total == static_cast<int>(m.size()));
    if (!m.empty() && m[0] == 1) CHECK(runs[0] == 0);
  }
  CHECK(rle_encode(Mask{}) == std::vector<int>{0});
  CHECK_THROWS_AS(rle_decode({3, -1}), PlanningError);
}
