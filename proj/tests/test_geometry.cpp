#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "retina/errors.hpp"
#include "retina/geometry.hpp"
#include "retina/trocar.hpp"

using namespace retina;

TEST_CASE("rot_x of zero is the identity") {
  CHECK((rot_x(0.0) - Mat3::Identity()).norm() == 0.0);
  CHECK((rot_y(0.0) - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("rot_x is right handed") {
  const Vec3 v = rot_x(90.0) * Vec3(0, 1, 0);
  CHECK((v - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK((rot_y(90.0) * Vec3(0, 0, 1) - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((rot_z(90.0) * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("rot_y(-2b) rot_x(-2a) for a = b = 15 matches Rodrigues product") {
  const Mat3 ours = rot_y(-30.0) * rot_x(-30.0);
  const Mat3 ref = oracle::ry(-30.0) * oracle::rx(-30.0);
  CHECK((ours - ref).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("rotations are proper and preserve norms") {
  oracle::Gen g(11);
  for (int i = 0; i < 1000; ++i) {
    const double a = g.uniform(-360, 360);
    for (const Mat3& m : {rot_x(a), rot_y(a), rot_z(a)}) {
      CHECK(std::abs(m.determinant() - 1.0) < 1e-12);
      CHECK((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
      const Vec3 v = 100.0 * g.unit();
      CHECK(std::abs((m * v).norm() - v.norm()) < 1e-12);
    }
    CHECK((rot_x(a) - oracle::rx(a)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((rot_y(a) - oracle::ry(a)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("spherical_to_cartesian anchors") {
  EyeModel eye;
  CHECK((spherical_to_cartesian({180.0, 0.0}, eye) - Vec3(0, 0, -12.1)).norm() < 1e-12);
  CHECK((spherical_to_cartesian({90.0, 90.0}, eye) - Vec3(12.1, 0, 0)).norm() < 1e-12);
  CHECK((spherical_to_cartesian({0.0, 0.0}, eye) - Vec3(0, 0, 12.1)).norm() < 1e-12);
}

TEST_CASE("spherical_to_cartesian agrees with the rotation oracle") {
  oracle::Gen g(3);
  EyeModel eye;
  eye.center = Vec3(1.0, -2.0, 0.5);
  for (int i = 0; i < 1000; ++i) {
    const double p = g.uniform(0, 180), a = g.uniform(-180, 180);
    const Vec3 ref = oracle::sphere_point(p, a, eye.radius_mm, eye.center);
    CHECK((spherical_to_cartesian({p, a}, eye) - ref).norm() < 1e-12);
  }
}

TEST_CASE("spherical round trip fuzz, 1e4 samples") {
  oracle::Gen g(42);
  EyeModel eye;
  eye.radius_mm = 11.0;
  eye.center = Vec3(0.3, 0.2, -0.1);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto [p, a] = g.cap(0.5, 179.5);
    const Vec3 x = spherical_to_cartesian({p, a}, eye);
    CHECK(std::abs((x - eye.center).norm() - eye.radius_mm) < 1e-9);
    const SphericalPoint back = cartesian_to_spherical(x, eye);
    worst = std::max(worst, (spherical_to_cartesian(back, eye) - x).norm());
    CHECK(std::abs(back.polar_deg - p) < 1e-9);
    CHECK(std::abs(wrap_deg(back.azimuth_deg - a)) < 1e-9);
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("cartesian_to_spherical rejects points off the sphere") {
  EyeModel eye;
  CHECK_THROWS_AS(cartesian_to_spherical(Vec3(0, 0, -12.2), eye), PlanningError);
  try {
    cartesian_to_spherical(Vec3(0, 0, -12.1 - 2e-6), eye);
    FAIL("expected OffSphere");
  } catch (const PlanningError& e) {
    CHECK(e.code() == ErrorCode::OffSphere);
  }
  CHECK_NOTHROW(cartesian_to_spherical(Vec3(0, 0, -12.1 - 5e-7), eye));
}

TEST_CASE("azimuth is normalized to (-180, 180]") {
  CHECK(SphericalPoint{90, 180}.normalized().azimuth_deg == doctest::Approx(180.0));
  CHECK(SphericalPoint{90, -180}.normalized().azimuth_deg == doctest::Approx(180.0));
  CHECK(SphericalPoint{90, 270}.normalized().azimuth_deg == doctest::Approx(-90.0));
  CHECK(SphericalPoint{90, 540}.normalized().azimuth_deg == doctest::Approx(180.0));
}

TEST_CASE("line_sphere_depth: diameter chord") {
  EyeModel eye;
  CHECK(line_sphere_depth(Vec3(0, 0, 12.1), Vec3(0, 0, -1), eye) == doctest::Approx(24.2).epsilon(1e-14));
}

TEST_CASE("line_sphere_depth: grazing line returns the tangency distance") {
  EyeModel eye;
  // From a point on the sphere, a tangent direction touches only there.
  CHECK(line_sphere_depth(Vec3(0, 0, 12.1), Vec3(1, 0, 0), eye) == doctest::Approx(0.0).epsilon(1e-12));
  // Tangent from a point 1 mm outside.
  const double d = 13.1;
  const double t = std::sqrt(d * d - 12.1 * 12.1);
  const Vec3 origin(0, 0, d);
  const Vec3 tangent_point(12.1 * std::sqrt(1 - std::pow(12.1 / d, 2)), 0, 12.1 * 12.1 / d);
  const Vec3 dir = (tangent_point - origin).normalized();
  CHECK(line_sphere_depth(origin, dir, eye) == doctest::Approx(t).epsilon(1e-9));
}

TEST_CASE("line_sphere_depth: miss throws NoIntersection") {
  EyeModel eye;
  try {
    line_sphere_depth(Vec3(0, 0, 13.0), Vec3(1, 0, 0), eye);
    FAIL("expected NoIntersection");
  } catch (const PlanningError& e) {
    CHECK(e.code() == ErrorCode::NoIntersection);
  }
  CHECK_THROWS_AS(line_sphere_depth(Vec3(0, 0, 30.0), Vec3(0, 0, -1), eye), PlanningError);
}

TEST_CASE("line_sphere_depth: 100 random chords land on the sphere") {
  oracle::Gen g(7);
  EyeModel eye;
  eye.center = Vec3(0.5, -0.5, 1.0);
  for (int i = 0; i < 100; ++i) {
    const auto [p, a] = g.cap(10, 80);
    const Vec3 rcm = spherical_to_cartesian({p, a}, eye) + g.uniform(-0.5, 0.5) * g.unit();
    // Aim somewhere inside the eye so the line is a proper chord.
    const Vec3 aim = eye.center + 0.5 * eye.radius_mm * g.unit();
    const Vec3 dir = (aim - rcm).normalized();
    const double depth = line_sphere_depth(rcm, dir, eye);
    const Vec3 tip = rcm + depth * dir;
    CHECK(std::abs((tip - eye.center).norm() - eye.radius_mm) < 1e-9);
    // Distal root: the tip lies beyond the aim point.
    CHECK(depth > (aim - rcm).norm());
  }
}

TEST_CASE("InstrumentLine: lambda places the RCM between p5 and the tip") {
  InstrumentLine line;
  line.rcm_point = Vec3(1, 2, 3);
  line.direction = Vec3(0, 0.6, -0.8);
  line.instrument_length_mm = 35.0;
  const double depth = 20.0;
  line.tip_point = line.rcm_point + depth * line.direction;
  line.lambda = (35.0 - depth) / 35.0;
  const Vec3 p5 = line.p5();
  CHECK((p5 - (line.tip_point - 35.0 * line.direction)).norm() < 1e-12);
  CHECK((p5 + line.lambda * (line.tip_point - p5) - line.rcm_point).norm() < 1e-12);
}

TEST_CASE("tilt then inverse tilt restores retinal points") {
  oracle::Gen g(5);
  EyeModel eye;
  for (int i = 0; i < 500; ++i) {
    const double a = g.uniform(-10, 10), b = g.uniform(-10, 10);
    const auto [p, az] = g.cap(90, 180);
    const Vec3 x = spherical_to_cartesian({p, az}, eye);
    const Vec3 tilted = tilt_point(x, a, b, eye);
    // Undo in reverse order: rot_x(-a) rot_y(-b).
    const Vec3 back = rot_x(-a) * (rot_y(-b) * (tilted - eye.center)) + eye.center;
    CHECK((back - x).norm() < 1e-9);
  }
}

TEST_CASE("central angle and geodesic") {
  EyeModel eye;
  const Vec3 a = spherical_to_cartesian({180, 0}, eye);
  const Vec3 b = spherical_to_cartesian({150, 37}, eye);
  CHECK(central_angle_deg(a, b, eye.center) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(geodesic_mm(a, b, eye) == doctest::Approx(12.1 * oracle::kPi / 6.0).epsilon(1e-12));
}

TEST_CASE("EyeModel validation") {
  EyeModel eye;
  eye.radius_mm = 0.0;
  CHECK_THROWS_AS(eye.validate(), PlanningError);
  EyeModel tilted;
  tilted.tilt_alpha_deg = 12.0;
  CHECK_THROWS_AS(tilted.validate(), PlanningError);
}
