#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "retina/geometry.hpp"

namespace retina {

/// 8-bit grayscale raster, row-major, row 0 at the top.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int col, int row) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  std::uint8_t& at(int col, int row) {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_png(const std::filesystem::path& path);
/// Dispatches on the file signature (P5 PGM or PNG). Throws ImageUnreadable.
GrayImage read_image(const std::filesystem::path& path);

/// Pixel-to-millimetre calibration of a fundus (or en-face phantom) image.
struct FundusImageMeta {
  int width_px = 0;
  int height_px = 0;
  double view_angle_deg = 60.0;
  Eigen::Vector2d detected_center_px = Eigen::Vector2d::Zero();  // raster (col, row)
  double detected_diameter_px = 0.0;
  double mm_per_px = 0.0;
};

/// D_FoV = 2 r sin(view/2), k = D_FoV / D_pixel.
FundusImageMeta make_fundus_meta(int width_px, int height_px, double view_angle_deg,
                                 const Eigen::Vector2d& center_px, double diameter_px,
                                 const EyeModel& eye);

struct CircleFit {
  Eigen::Vector2d center_px = Eigen::Vector2d::Zero();
  double diameter_px = 0.0;
  double axis_ratio = 1.0;  // minor/major of the refined conic
  int support = 0;          // edge pixels used in the refinement
};

/// Finds the dominant bright, near-circular field of view. Gradient-voting
/// Hough transform for the centre, radial histogram for the radius, then a
/// least-squares conic refinement; an elliptical boundary reports the mean
/// of its two axes. Throws BoundaryNotFound when no peak clears threshold.
CircleFit detect_circle(const GrayImage& image);

FundusImageMeta detect_fundus_boundary(const GrayImage& image, double view_angle_deg,
                                       const EyeModel& eye);

/// Click offset from the detected centre, +y pointing up in the image.
struct PixelTarget {
  double x_px = 0.0;
  double y_px = 0.0;

  double l_pixel() const;

  static PixelTarget from_raster(double col, double row, const FundusImageMeta& meta);
};

/// Reconstructs the retinal point under a click. The returned polar angle is
/// measured from the corneal pole (posterior pole = 180). Throws OutOfField
/// when the click lies beyond the eye radius.
SphericalPoint pixel_to_polar(const PixelTarget& t, const FundusImageMeta& meta,
                              const EyeModel& eye);

/// Forward camera model used by pixel_to_polar: orthographic projection of a
/// posterior-hemisphere point onto the image plane, as raster (col, row).
Eigen::Vector2d polar_to_raster(const SphericalPoint& p, const FundusImageMeta& meta,
                                const EyeModel& eye);

/// Visual/optical axis offset. kappa2_deg is the fovea's angular offset from
/// the posterior pole and is derived from the other two fields.
struct AxisCompensation {
  double kappa_deg = 5.0;
  double nodal_offset_mm = 16.4;
  double kappa2_deg = 0.0;

  static AxisCompensation derive(double kappa_deg, double nodal_offset_mm, const EyeModel& eye);
};

/// Intersects the visual axis with the eye outline and returns the fovea
/// offset angle. Throws NoSolution when the axis misses the circle.
double solve_kappa2(const AxisCompensation& c, const EyeModel& eye);

/// Applies rot_x(kappa2) to the target.
SphericalPoint compensate_visual_axis(const SphericalPoint& p, const AxisCompensation& c,
                                      const EyeModel& eye);

struct SyntheticFundusOptions {
  int width = 1024;
  int height = 1024;
  Eigen::Vector2d center_px{512.0, 512.0};
  double diameter_px = 900.0;
  double axis_ratio = 1.0;        // vertical/horizontal diameter ratio
  double speckle_fraction = 0.0;  // fraction of pixels replaced by uniform noise
  std::uint64_t seed = 1;
  std::uint8_t background = 12;
  std::uint8_t foreground = 170;
};

/// Renders an anti-aliased bright disc on a dark background with mild
/// vignetting, optionally with speckle noise. Ground truth is the options.
GrayImage render_synthetic_fundus(const SyntheticFundusOptions& options);

}  // namespace retina
