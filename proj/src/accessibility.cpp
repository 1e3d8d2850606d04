#include "retina/accessibility.hpp"

#include <cmath>

#include "retina/errors.hpp"
#include "retina/planner.hpp"
#include "retina/trocar.hpp"

namespace retina {

void RegionGridSpec::validate() const {
  if (!(polar_step_deg > 0.0) || !(azimuth_step_deg > 0.0) || polar_min_deg < 0.0 ||
      polar_max_deg > 180.0 || polar_min_deg > polar_max_deg) {
    throw PlanningError(ErrorCode::InvalidArgument, "bad region grid");
  }
}

int RegionGridSpec::polar_count() const {
  return static_cast<int>(std::floor((polar_max_deg - polar_min_deg) / polar_step_deg + 1e-9)) + 1;
}

int RegionGridSpec::azimuth_count() const {
  return static_cast<int>(std::floor(360.0 / azimuth_step_deg + 1e-9));
}

std::vector<SphericalPoint> make_region_grid(const RegionGridSpec& spec) {
  spec.validate();
  std::vector<SphericalPoint> grid;
  const int np = spec.polar_count();
  const int na = spec.azimuth_count();
  grid.reserve(static_cast<std::size_t>(np) * na);
  for (int i = 0; i < np; ++i) {
    const double polar = spec.polar_min_deg + i * spec.polar_step_deg;
    for (int j = 0; j < na; ++j) {
      grid.push_back(SphericalPoint{polar, wrap_deg(-180.0 + (j + 1) * spec.azimuth_step_deg)});
    }
  }
  return grid;
}

Mask visible_mask(const std::vector<SphericalPoint>& grid, double alpha_deg, double beta_deg,
                  double view_angle_deg, const EyeModel& eye) {
  Mask m(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    m[i] = is_visible(spherical_to_cartesian(grid[i], eye), alpha_deg, beta_deg, view_angle_deg, eye) ? 1 : 0;
  }
  return m;
}

Mask accessible_mask(const std::vector<SphericalPoint>& grid, double alpha_deg, double beta_deg,
                     const RobotSetup& setup, const EyeModel& eye) {
  Mask m(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec3 p = tilt_point(spherical_to_cartesian(grid[i], eye), alpha_deg, beta_deg, eye);
    const JointTarget j = solve_joint_target(p, setup, eye);
    m[i] = (j.within_limits && j.depth_mm > 0.0) ? 1 : 0;
  }
  return m;
}

Mask mask_and(const Mask& a, const Mask& b) {
  if (a.size() != b.size()) throw PlanningError(ErrorCode::InvalidArgument, "mask size mismatch");
  Mask m(a.size(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = (a[i] && b[i]) ? 1 : 0;
  return m;
}

RetinalRegionSample sample_region(const RegionGridSpec& spec, double alpha_deg, double beta_deg,
                                  double view_angle_deg, const RobotSetup& setup,
                                  const EyeModel& eye) {
  RetinalRegionSample s;
  s.spec = spec;
  s.grid = make_region_grid(spec);
  s.visible = visible_mask(s.grid, alpha_deg, beta_deg, view_angle_deg, eye);
  s.accessible = accessible_mask(s.grid, alpha_deg, beta_deg, setup, eye);
  s.both = mask_and(s.visible, s.accessible);
  return s;
}

std::vector<double> cell_area_fractions(const RegionGridSpec& spec,
                                        const std::vector<SphericalPoint>& grid) {
  // Each sample owns the band [polar - h/2, polar + h/2] clipped to the grid.
  const double h = spec.polar_step_deg;
  const double dphi = deg2rad(spec.azimuth_step_deg);
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double lo = std::max(spec.polar_min_deg, grid[i].polar_deg - h / 2.0);
    const double hi = std::min(spec.polar_max_deg, grid[i].polar_deg + h / 2.0);
    w[i] = dphi * (std::cos(deg2rad(lo)) - std::cos(deg2rad(hi))) / (4.0 * kPi);
  }
  return w;
}

double mask_area_fraction(const Mask& m, const std::vector<double>& weights) {
  double sum = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) sum += weights[i];
  }
  return sum;
}

bool mask_centroid(const Mask& m, const std::vector<SphericalPoint>& grid,
                   const std::vector<double>& weights, const EyeModel& eye, Vec3& out) {
  Vec3 sum = Vec3::Zero();
  bool any = false;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    any = true;
    sum += weights[i] * (spherical_to_cartesian(grid[i], eye) - eye.center).normalized();
  }
  if (!any || sum.norm() < 1e-15) return false;
  out = eye.center + eye.radius_mm * sum.normalized();
  return true;
}

std::vector<int> rle_encode(const Mask& m) {
  std::vector<int> runs;
  std::uint8_t current = 0;
  int count = 0;
  for (auto v : m) {
    const std::uint8_t b = v ? 1 : 0;
    if (b != current) {
      runs.push_back(count);
      current = b;
      count = 0;
    }
    ++count;
  }
  runs.push_back(count);
  return runs;
}

Mask rle_decode(const std::vector<int>& runs) {
  Mask m;
  std::uint8_t value = 0;
  for (int r : runs) {
    if (r < 0) throw PlanningError(ErrorCode::InvalidArgument, "negative run length");
    m.insert(m.end(), static_cast<std::size_t>(r), value);
    value ^= 1;
  }
  return m;
}

}  // namespace retina
