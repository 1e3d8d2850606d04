#pragma once

#include <cstdint>
#include <vector>

#include "retina/geometry.hpp"
#include "retina/robot.hpp"

namespace retina {

/// Regular polar x azimuth grid over part of the eye (posterior hemisphere
/// by default). Azimuths run over (-180, 180].
struct RegionGridSpec {
  double polar_min_deg = 90.0;
  double polar_max_deg = 180.0;
  double polar_step_deg = 1.0;
  double azimuth_step_deg = 2.0;

  void validate() const;
  int polar_count() const;
  int azimuth_count() const;
};

std::vector<SphericalPoint> make_region_grid(const RegionGridSpec& spec);

using Mask = std::vector<std::uint8_t>;

struct RetinalRegionSample {
  RegionGridSpec spec;
  std::vector<SphericalPoint> grid;
  Mask visible;
  Mask accessible;
  Mask both;
};

/// Samples inside the microscope cone after tilting the eye by (alpha, beta).
Mask visible_mask(const std::vector<SphericalPoint>& grid, double alpha_deg, double beta_deg,
                  double view_angle_deg, const EyeModel& eye);

/// Samples the instrument can reach with joints inside their limits, given
/// the robot placement fixed by `setup` (RCM already on the tilted trocar).
Mask accessible_mask(const std::vector<SphericalPoint>& grid, double alpha_deg, double beta_deg,
                     const RobotSetup& setup, const EyeModel& eye);

Mask mask_and(const Mask& a, const Mask& b);

RetinalRegionSample sample_region(const RegionGridSpec& spec, double alpha_deg, double beta_deg,
                                  double view_angle_deg, const RobotSetup& setup,
                                  const EyeModel& eye);

/// Solid angle of each sample's cell divided by 4 pi, so summing a mask
/// gives the fraction of the whole sphere it covers.
std::vector<double> cell_area_fractions(const RegionGridSpec& spec,
                                        const std::vector<SphericalPoint>& grid);
double mask_area_fraction(const Mask& m, const std::vector<double>& weights);

/// Area-weighted mean direction of the set samples (eye-body frame).
/// Returns false when the mask is empty.
bool mask_centroid(const Mask& m, const std::vector<SphericalPoint>& grid,
                   const std::vector<double>& weights, const EyeModel& eye, Vec3& out);

/// Run lengths of alternating values, starting with a run of zeros (which
/// may be empty).
std::vector<int> rle_encode(const Mask& m);
Mask rle_decode(const std::vector<int>& runs);

}  // namespace retina
