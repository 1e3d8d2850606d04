#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "retina/errors.hpp"
#include "retina/posture.hpp"
#include "retina/trocar.hpp"

using namespace retina;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const PlanningError& e) {
    return e.code();
  }
  FAIL("expected a PlanningError");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("posture") {
  TEST_CASE("pole needs no tilt") {
    const auto p = solve_eye_tilt(SphericalPoint{180.0, 0.0}, EyeModel{});
    CHECK(p.alpha_deg == doctest::Approx(0.0));
    CHECK(p.beta_deg == doctest::Approx(0.0));
    CHECK_FALSE(p.clamped);
    CHECK(p.residual_mm == doctest::Approx(0.0));
  }

  TEST_CASE("y = -r sin 20 sits on the alpha limit") {
    EyeModel eye;
    const double r = eye.radius_mm;
    const Vec3 target(0.0, -r * std::sin(oracle::rad(20)), -r * std::cos(oracle::rad(20)));
    const auto p = solve_eye_tilt(target, eye);
    CHECK(p.alpha_deg == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(p.beta_deg == doctest::Approx(0.0));
    CHECK_FALSE(p.clamped);
    CHECK((fov_center_vector(p.alpha_deg, p.beta_deg, eye) - target).norm() < 1e-9);
  }

  TEST_CASE("polar 150 azimuth 90 clamps beta from 15 to 10") {
    const auto p = solve_eye_tilt(SphericalPoint{150.0, 90.0}, EyeModel{});
    CHECK(p.beta_deg == doctest::Approx(10.0));
    CHECK(p.alpha_deg == doctest::Approx(0.0));
    CHECK(p.clamped);
    CHECK(p.residual_mm > 0.0);
    // The reported centre comes from the clamped angles.
    CHECK(p.fov_center_after.polar_deg == doctest::Approx(160.0));
  }

  TEST_CASE("fov centre closed form") {
    EyeModel eye;
    const double r = eye.radius_mm;
    CHECK((fov_center_vector(0, 0, eye) - Vec3(0, 0, -r)).norm() < 1e-15);
    const Vec3 v = fov_center_vector(5, 0, eye);
    CHECK((v - Vec3(0, -r * std::sin(oracle::rad(10)), -r * std::cos(oracle::rad(10)))).norm() < 1e-12);
  }

  TEST_CASE("fov centre closed form matches the matrix product") {
    oracle::Gen g(17);
    EyeModel eye;
    for (int i = 0; i < 1000; ++i) {
      const double a = g.uniform(-40, 40), b = g.uniform(-40, 40);
      const Vec3 ref = oracle::ry(-2 * b) * oracle::rx(-2 * a) * Vec3(0, 0, -eye.radius_mm);
      CHECK((fov_center_vector(a, b, eye) - ref).norm() < 1e-12);
    }
  }

  TEST_CASE("unclamped solutions invert the fov map") {
    oracle::Gen g(23);
    EyeModel eye;
    eye.center = Vec3(0.2, -0.1, 0.4);
    for (int i = 0; i < 1000; ++i) {
      const double a = g.uniform(-9.99, 9.99), b = g.uniform(-9.99, 9.99);
      const Vec3 target = fov_center_vector(a, b, eye);
      const auto p = solve_eye_tilt(target, eye);
      CHECK_FALSE(p.clamped);
      CHECK(p.alpha_deg == doctest::Approx(a).epsilon(1e-9));
      CHECK(p.beta_deg == doctest::Approx(b).epsilon(1e-9));
      CHECK((fov_center_vector(p.alpha_deg, p.beta_deg, eye) - target).norm() < 1e-9);
    }
  }

  TEST_CASE("the view centre moves by twice the tilt") {
    EyeModel eye;
    for (double t = 0.5; t < 45.0; t += 0.5) {
      const SphericalPoint s = fov_center_after_tilt(t, 0.0, eye);
      CHECK(180.0 - s.polar_deg == doctest::Approx(2 * t).epsilon(1e-12));
    }
  }

  TEST_CASE("clamped proposals stay in the box and get closer than no tilt") {
    oracle::Gen g(31);
    EyeModel eye;
    int clamped = 0;
    for (int i = 0; i < 2000; ++i) {
      const auto [p, az] = g.cap(100, 180);
      const Vec3 target = spherical_to_cartesian({p, az}, eye);
      const auto prop = solve_eye_tilt(target, eye);
      CHECK(std::abs(prop.alpha_deg) <= 10.0);
      CHECK(std::abs(prop.beta_deg) <= 10.0);
      if (!prop.clamped) continue;
      ++clamped;
      const double untilted = geodesic_mm(fov_center_vector(0, 0, eye), target, eye);
      CHECK(prop.residual_mm < untilted);
    }
    CHECK(clamped > 100);
  }

  TEST_CASE("off-sphere and anterior targets") {
    EyeModel eye;
    CHECK(code_of([&] { solve_eye_tilt(Vec3(0, 0, -13), eye); }) == ErrorCode::OffSphere);
    CHECK(code_of([&] { solve_eye_tilt(SphericalPoint{60, 30}, eye); }) == ErrorCode::Unreachable);
  }
}

TEST_SUITE("trocar") {
  TEST_CASE("default layout: three trocars about 3 mm apart on the sphere") {
    EyeModel eye;
    const auto layout = make_trocar_layout(TrocarLayoutConfig{}, eye);
    for (const auto& t : layout.trocars) {
      CHECK(std::abs(t.world.norm() - eye.radius_mm) < 1e-12);
      CHECK(t.position.polar_deg == doctest::Approx(45.0));
      CHECK(t.world.x() > 0.0);  // 3 o'clock side
    }
    for (int i = 0; i < 2; ++i) {
      const double chord = (layout.trocars[i].world - layout.trocars[i + 1].world).norm();
      CHECK(chord == doctest::Approx(3.0).epsilon(0.02));
    }
    TrocarLayoutConfig nine;
    nine.side = TrocarSide::NineOClock;
    const auto left = make_trocar_layout(nine, eye);
    CHECK(left.trocars[1].world.x() == doctest::Approx(-layout.trocars[1].world.x()));
  }

  TEST_CASE("rotate_scene: identity, matrix oracle and inverse") {
    EyeModel eye;
    TrocarLayoutConfig cfg;
    cfg.azimuth_offsets_deg = {-20, 0, 20};
    const auto layout = make_trocar_layout(cfg, eye);
    const Vec3 target = spherical_to_cartesian({170, 40}, eye);

    const auto same = rotate_scene(layout, {target}, 0, 0, eye);
    for (int i = 0; i < 3; ++i) CHECK((same.trocars[i] - layout.trocars[i].world).norm() == 0.0);

    const Vec3 single = spherical_to_cartesian({45, 0}, eye);
    CHECK((tilt_point(single, 10, 0, eye) - oracle::rx(10) * single).norm() < 1e-12);
    CHECK((tilt_point(single, 4, -7, eye) - oracle::ry(-7) * oracle::rx(4) * single).norm() < 1e-12);

    const auto moved = rotate_scene(layout, {target}, 7, -3, eye);
    const Vec3 back = oracle::rx(-7) * (oracle::ry(3) * moved.targets[0]);
    CHECK((back - target).norm() < 1e-9);
  }

  TEST_CASE("rotate_scene keeps trocar-to-target geodesics") {
    oracle::Gen g(41);
    EyeModel eye;
    const auto layout = make_trocar_layout(TrocarLayoutConfig{}, eye);
    for (int i = 0; i < 200; ++i) {
      const auto [p, az] = g.cap(120, 180);
      const Vec3 target = spherical_to_cartesian({p, az}, eye);
      const double a = g.uniform(-10, 10), b = g.uniform(-10, 10);
      const auto moved = rotate_scene(layout, {target}, a, b, eye);
      for (int k = 0; k < 3; ++k) {
        CHECK(geodesic_mm(moved.trocars[k], moved.targets[0], eye) ==
              doctest::Approx(geodesic_mm(layout.trocars[k].world, target, eye)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("select_trocar: nearest along robot X with the documented tie rule") {
    const RobotFrame frame{0.0};  // identity: robot X is world X
    const std::array<Vec3, 3> tro{Vec3(-3, 5, 5), Vec3(0, 5, 5), Vec3(3, 5, 5)};
    CHECK(select_trocar(tro, Vec3(0.2, 0, -10), frame) == 1);
    CHECK(select_trocar(tro, Vec3(5.0, 0, -10), frame) == 2);
    CHECK(select_trocar(tro, Vec3(-2.0, 0, -10), frame) == 0);
    CHECK(select_trocar(tro, Vec3(1.5, 0, -10), frame) == 1);   // tie 1/2 -> middle
    CHECK(select_trocar(tro, Vec3(-1.5, 0, -10), frame) == 1);  // tie 0/1 -> middle
    const std::array<Vec3, 3> outer_tie{Vec3(-3, 5, 5), Vec3(10, 5, 5), Vec3(3, 5, 5)};
    CHECK(select_trocar(outer_tie, Vec3(0, 0, -10), frame) == 0);  // tie 0/2 -> lower index
  }

  TEST_CASE("select_trocar in the default frame") {
    EyeModel eye;
    const auto layout = make_trocar_layout(TrocarLayoutConfig{}, eye);
    const RobotFrame frame = RobotFrame::facing(TrocarSide::ThreeOClock);
    const auto scene0 = rotate_scene(layout, {spherical_to_cartesian({180, 0}, eye)}, 0, 0, eye);
    CHECK(select_trocar(scene0.trocars, scene0.targets[0], frame) == 1);
    // Robot +X is world -Y here, where the +20 deg trocar sits.
    const auto scene2 = rotate_scene(layout, {spherical_to_cartesian({150, 180}, eye)}, 0, 0, eye);
    CHECK(frame.to_robot(scene2.trocars[2]).x() > 0.0);
    CHECK(select_trocar(scene2.trocars, scene2.targets[0], frame) == 2);
    const auto scene1 = rotate_scene(layout, {spherical_to_cartesian({150, 0}, eye)}, 0, 0, eye);
    CHECK(select_trocar(scene1.trocars, scene1.targets[0], frame) == 0);
  }

  TEST_CASE("select_trocar does not depend on the eye size") {
    oracle::Gen g(43);
    for (int i = 0; i < 300; ++i) {
      EyeModel small, big;
      big.radius_mm = small.radius_mm * g.uniform(0.5, 3.0);
      const auto [p, az] = g.cap(120, 180);
      const double a = g.uniform(-10, 10), b = g.uniform(-10, 10);
      const RobotFrame frame = RobotFrame::facing(TrocarSide::ThreeOClock);
      int picks[2];
      int k = 0;
      for (const EyeModel* eye : {&small, &big}) {
        const auto layout = make_trocar_layout(TrocarLayoutConfig{}, *eye);
        const auto sc = rotate_scene(layout, {spherical_to_cartesian({p, az}, *eye)}, a, b, *eye);
        picks[k++] = select_trocar(sc.trocars, sc.targets[0], frame);
      }
      CHECK(picks[0] == picks[1]);
    }
  }

  TEST_CASE("initial tilt is measured from -Z in the robot YZ plane") {
    CHECK(initial_tilt(Vec3(0, -1, -1) / std::sqrt(2.0)) == doctest::Approx(45.0));
    CHECK(initial_tilt(Vec3(0, 0, -1)) == doctest::Approx(0.0));
    CHECK(initial_tilt(Vec3(5, -1, -1)) == doctest::Approx(45.0));
    CHECK(code_of([] { initial_tilt(Vec3(1, 0, 0)); }) == ErrorCode::DegenerateApproach);
  }

  TEST_CASE("refinement angle") {
    CHECK(refinement_angle(Vec3(0, -3, -7)) == doctest::Approx(0.0));
    CHECK(code_of([] { refinement_angle(Vec3(-2, 0, 0)); }) == ErrorCode::DegenerateApproach);
    oracle::Gen g(47);
    for (int i = 0; i < 1000; ++i) {
      const Vec3 v = g.unit() * g.uniform(1, 30);
      const Vec3 proj(0, v.y(), v.z());
      if (proj.norm() < 1e-6) continue;
      const double unsigned_angle = oracle::deg(std::acos(std::clamp(v.dot(proj) / (v.norm() * proj.norm()), -1.0, 1.0)));
      const double gamma = refinement_angle(v);
      CHECK(std::abs(gamma) == doctest::Approx(unsigned_angle).epsilon(1e-9));
      CHECK((gamma > 0) == (v.x() < 0));
    }
  }

  TEST_CASE("gamma vanishes exactly when the approach lies in the YZ plane") {
    EyeModel eye;
    const auto layout = make_trocar_layout(TrocarLayoutConfig{}, eye);
    const RobotFrame frame = RobotFrame::facing(TrocarSide::ThreeOClock);
    // Targets on the trocar's meridian (azimuth 0 or 180 in robot Y) keep v in YZ.
    for (double polar : {150.0, 165.0, 180.0}) {
      const Vec3 t = spherical_to_cartesian({polar, 90.0}, eye);
      const auto plan = plan_approach(layout, t, proposal_for_tilt(0, 0, t, eye), frame, eye);
      CHECK(std::abs(plan.v_robot.x()) < 1e-9);
      CHECK(std::abs(plan.gamma_deg) < 1e-9);
    }
    const Vec3 off = spherical_to_cartesian({170.0, 10.0}, eye);
    const auto plan = plan_approach(layout, off, proposal_for_tilt(0, 0, off, eye), frame, eye);
    CHECK(std::abs(plan.gamma_deg) > 1e-3);
  }

  TEST_CASE("the (150, 140) scene") {
    EyeModel eye;
    const auto layout = make_trocar_layout(TrocarLayoutConfig{}, eye);
    const Vec3 t = spherical_to_cartesian({150, 140}, eye);
    const auto tilt = solve_eye_tilt(t, eye);
    const auto plan = plan_approach(layout, t, tilt, RobotFrame::facing(TrocarSide::ThreeOClock), eye);
    CHECK(plan.selected_index == 1);
    CHECK(plan.gamma_deg < 0.0);
    CHECK(std::abs(plan.gamma_deg - (-4.19)) < 0.7);
    CHECK(plan.feasible);
    // Stored points are the tilted originals.
    CHECK((plan.trocar_after - oracle::ry(tilt.beta_deg) * oracle::rx(tilt.alpha_deg) * layout.trocars[1].world).norm() < 1e-9);
    CHECK((plan.target_after - oracle::ry(tilt.beta_deg) * oracle::rx(tilt.alpha_deg) * t).norm() < 1e-9);
  }

  TEST_CASE("pole approach from either side is near the middle of the tilt band") {
    EyeModel eye;
    for (auto side : {TrocarSide::ThreeOClock, TrocarSide::NineOClock}) {
      TrocarLayoutConfig cfg;
      cfg.side = side;
      const auto layout = make_trocar_layout(cfg, eye);
      const Vec3 t = spherical_to_cartesian({180, 0}, eye);
      const auto plan = plan_approach(layout, t, proposal_for_tilt(0, 0, t, eye), RobotFrame::facing(side), eye);
      CHECK(plan.selected_index == 1);
      CHECK(plan.theta_ini_deg == doctest::Approx(22.5).epsilon(1e-12));
      CHECK(plan.gamma_deg == doctest::Approx(0.0));
      CHECK(plan.feasible);
    }
  }

  TEST_CASE("theta_ini outside the band is flagged, not clamped") {
    EyeModel eye;
    const auto layout = make_trocar_layout(TrocarLayoutConfig{}, eye);
    const Vec3 t = spherical_to_cartesian({180, 0}, eye);
    const auto plan = plan_approach(layout, t, proposal_for_tilt(0, 0, t, eye),
                                    RobotFrame::facing(TrocarSide::ThreeOClock), eye, ThetaIniBand{25, 31});
    CHECK_FALSE(plan.feasible);
    CHECK(plan.theta_ini_deg == doctest::Approx(22.5));
    REQUIRE(plan.reasons.size() == 1);
    CHECK(plan.reasons[0] == "theta_ini_out_of_band");
  }
}
