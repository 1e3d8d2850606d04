#include "retina/fundus.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "retina/errors.hpp"

namespace retina {

namespace {

[[noreturn]] void unreadable(const std::filesystem::path& path, const std::string& why) {
  throw PlanningError(ErrorCode::ImageUnreadable, path.string() + ": " + why);
}

// Skips whitespace and '#' comments in a PNM header.
void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

GrayImage median3x3(const GrayImage& src) {
  GrayImage out = src;
  std::array<std::uint8_t, 9> window{};
  for (int y = 1; y + 1 < src.height; ++y) {
    for (int x = 1; x + 1 < src.width; ++x) {
      int k = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) window[k++] = src.at(x + dx, y + dy);
      }
      std::nth_element(window.begin(), window.begin() + 4, window.end());
      out.at(x, y) = window[4];
    }
  }
  return out;
}

struct EdgePixel {
  double x;
  double y;
  double ux;  // unit gradient
  double uy;
};

std::vector<EdgePixel> sobel_edges(const GrayImage& img) {
  const int w = img.width;
  const int h = img.height;
  std::vector<double> gx(static_cast<std::size_t>(w) * h, 0.0);
  std::vector<double> gy(gx.size(), 0.0);
  double max_mag = 0.0;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      auto p = [&](int dx, int dy) { return static_cast<double>(img.at(x + dx, y + dy)); };
      const double sx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
      const double sy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = sx;
      gy[i] = sy;
      max_mag = std::max(max_mag, std::hypot(sx, sy));
    }
  }
  std::vector<EdgePixel> edges;
  // A Sobel response of 24 is a 3-level step; anything flatter is noise.
  if (max_mag < 24.0) return edges;
  const double threshold = std::max(24.0, 0.2 * max_mag);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double m = std::hypot(gx[i], gy[i]);
      if (m >= threshold) edges.push_back({double(x), double(y), gx[i] / m, gy[i] / m});
    }
  }
  return edges;
}

struct Conic {
  Eigen::Vector2d center;
  double semi_major;
  double semi_minor;
};

// Least-squares fit of A x^2 + B xy + C y^2 + D x + E y = 1 in coordinates
// centred on `origin` and scaled by `scale`.
std::optional<Conic> fit_ellipse(const std::vector<Eigen::Vector2d>& pts,
                                 const Eigen::Vector2d& origin, double scale) {
  if (pts.size() < 6) return std::nullopt;
  Eigen::MatrixXd a(pts.size(), 5);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::Vector2d q = (pts[i] - origin) / scale;
    a.row(static_cast<Eigen::Index>(i)) << q.x() * q.x(), q.x() * q.y(), q.y() * q.y(), q.x(), q.y();
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
  const double A = c[0], B = c[1], C = c[2], D = c[3], E = c[4];
  if (4 * A * C - B * B <= 0) return std::nullopt;
  Eigen::Matrix2d m;
  m << 2 * A, B, B, 2 * C;
  const Eigen::Vector2d ctr = m.fullPivLu().solve(Eigen::Vector2d(-D, -E));
  const double fc = -1.0 + 0.5 * (D * ctr.x() + E * ctr.y());
  Eigen::Matrix2d q;
  q << A, B / 2, B / 2, C;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(q);
  const double l0 = es.eigenvalues()[0];
  const double l1 = es.eigenvalues()[1];
  if (!(l0 > 0 && l1 > 0 && fc < 0)) return std::nullopt;
  const double ax0 = std::sqrt(-fc / l0) * scale;
  const double ax1 = std::sqrt(-fc / l1) * scale;
  return Conic{origin + ctr * scale, std::max(ax0, ax1), std::min(ax0, ax1)};
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) unreadable(path, "cannot open");
  std::string magic;
  in >> magic;
  if (magic != "P5") unreadable(path, "not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  skip_pnm_space(in);
  in >> w;
  skip_pnm_space(in);
  in >> h;
  skip_pnm_space(in);
  in >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) unreadable(path, "bad PGM header");
  in.get();  // single whitespace before the raster
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) unreadable(path, "truncated raster");
  if (maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
  }
  return img;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) unreadable(path, "cannot open for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

GrayImage read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    unreadable(path, png.message);
  }
  png.format = PNG_FORMAT_GRAY;
  GrayImage img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    unreadable(path, msg);
  }
  return img;
}

GrayImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) unreadable(path, "cannot open");
  std::array<unsigned char, 8> sig{};
  in.read(reinterpret_cast<char*>(sig.data()), sig.size());
  if (in.gcount() >= 2 && sig[0] == 'P' && sig[1] == '5') return read_pgm(path);
  if (in.gcount() == 8 && png_sig_cmp(sig.data(), 0, 8) == 0) return read_png(path);
  unreadable(path, "unsupported image format (expected P5 PGM or PNG)");
}

FundusImageMeta make_fundus_meta(int width_px, int height_px, double view_angle_deg,
                                 const Eigen::Vector2d& center_px, double diameter_px,
                                 const EyeModel& eye) {
  if (!(diameter_px > 0.0)) {
    throw PlanningError(ErrorCode::InvalidArgument, "field-of-view diameter must be positive");
  }
  if (!(view_angle_deg > 0.0 && view_angle_deg < 180.0)) {
    throw PlanningError(ErrorCode::InvalidArgument, "view angle must lie in (0, 180)");
  }
  FundusImageMeta m;
  m.width_px = width_px;
  m.height_px = height_px;
  m.view_angle_deg = view_angle_deg;
  m.detected_center_px = center_px;
  m.detected_diameter_px = diameter_px;
  const double fov_mm = 2.0 * eye.radius_mm * std::sin(deg2rad(view_angle_deg / 2.0));
  m.mm_per_px = fov_mm / diameter_px;
  return m;
}

CircleFit detect_circle(const GrayImage& image) {
  if (image.width < 16 || image.height < 16) {
    throw PlanningError(ErrorCode::BoundaryNotFound, "image too small for boundary detection");
  }
  const GrayImage smooth = median3x3(image);
  const std::vector<EdgePixel> edges = sobel_edges(smooth);
  if (edges.size() < 32) {
    throw PlanningError(ErrorCode::BoundaryNotFound, "no edges in image");
  }

  const int w = image.width;
  const int h = image.height;
  const double r_min = 8.0;
  const double r_max = std::hypot(w, h) / 2.0;
  std::vector<int> acc(static_cast<std::size_t>(w) * h, 0);
  for (const auto& e : edges) {
    for (const double sign : {1.0, -1.0}) {
      for (double t = r_min; t <= r_max; t += 1.0) {
        const long cx = std::lround(e.x + sign * e.ux * t);
        const long cy = std::lround(e.y + sign * e.uy * t);
        if (cx < 0 || cy < 0 || cx >= w || cy >= h) break;
        ++acc[static_cast<std::size_t>(cy) * w + cx];
      }
    }
  }

  // 5x5 box sum of the accumulator, evaluated by brute force on candidates.
  int best = 0;
  Eigen::Vector2d centre = Eigen::Vector2d::Zero();
  {
    std::vector<int> rows(acc.size(), 0);
    for (int y = 0; y < h; ++y) {
      int run = 0;
      for (int x = 0; x < w; ++x) {
        run += acc[static_cast<std::size_t>(y) * w + x];
        if (x >= 5) run -= acc[static_cast<std::size_t>(y) * w + x - 5];
        if (x >= 4) rows[static_cast<std::size_t>(y) * w + x - 2] = run;
      }
    }
    for (int x = 0; x < w; ++x) {
      int run = 0;
      for (int y = 0; y < h; ++y) {
        run += rows[static_cast<std::size_t>(y) * w + x];
        if (y >= 5) run -= rows[static_cast<std::size_t>(y - 5) * w + x];
        if (y >= 4 && run > best) {
          best = run;
          centre = Eigen::Vector2d(x, y - 2);
        }
      }
    }
  }
  const int min_votes = std::max(64, static_cast<int>(0.15 * static_cast<double>(edges.size())));
  if (best < min_votes) {
    throw PlanningError(ErrorCode::BoundaryNotFound,
                        "Hough accumulator peak " + std::to_string(best) + " below threshold " +
                            std::to_string(min_votes));
  }

  // Radius from the histogram of radially oriented edge distances.
  std::vector<int> hist(static_cast<std::size_t>(r_max) + 3, 0);
  for (const auto& e : edges) {
    const Eigen::Vector2d d(e.x - centre.x(), e.y - centre.y());
    const double n = d.norm();
    if (n < r_min) continue;
    if (std::abs((d.x() * e.ux + d.y() * e.uy) / n) < 0.8) continue;
    const auto bin = static_cast<std::size_t>(std::lround(n));
    if (bin < hist.size()) ++hist[bin];
  }
  int peak_count = 0;
  std::size_t peak_bin = 0;
  for (std::size_t i = 2; i + 2 < hist.size(); ++i) {
    const int s = hist[i - 2] + hist[i - 1] + hist[i] + hist[i + 1] + hist[i + 2];
    if (s > peak_count) {
      peak_count = s;
      peak_bin = i;
    }
  }
  const double r_peak = static_cast<double>(peak_bin);
  if (peak_bin == 0 || peak_count < 0.25 * 2.0 * kPi * r_peak) {
    throw PlanningError(ErrorCode::BoundaryNotFound, "no circular boundary with enough support");
  }

  const double band = std::max(4.0, 0.12 * r_peak);
  std::vector<Eigen::Vector2d> support;
  for (const auto& e : edges) {
    const Eigen::Vector2d p(e.x, e.y);
    const Eigen::Vector2d d = p - centre;
    const double n = d.norm();
    if (n < r_min || std::abs(n - r_peak) > band) continue;
    if (std::abs((d.x() * e.ux + d.y() * e.uy) / n) < 0.8) continue;
    support.push_back(p);
  }

  CircleFit fit;
  fit.support = static_cast<int>(support.size());
  if (auto conic = fit_ellipse(support, centre, r_peak)) {
    fit.center_px = conic->center;
    fit.diameter_px = conic->semi_major + conic->semi_minor;
    fit.axis_ratio = conic->semi_minor / conic->semi_major;
  } else {
    fit.center_px = centre;
    fit.diameter_px = 2.0 * r_peak;
  }
  return fit;
}

FundusImageMeta detect_fundus_boundary(const GrayImage& image, double view_angle_deg,
                                       const EyeModel& eye) {
  const CircleFit fit = detect_circle(image);
  return make_fundus_meta(image.width, image.height, view_angle_deg, fit.center_px,
                          fit.diameter_px, eye);
}

double PixelTarget::l_pixel() const { return std::sqrt(x_px * x_px + y_px * y_px); }

PixelTarget PixelTarget::from_raster(double col, double row, const FundusImageMeta& meta) {
  return {col - meta.detected_center_px.x(), meta.detected_center_px.y() - row};
}

SphericalPoint pixel_to_polar(const PixelTarget& t, const FundusImageMeta& meta,
                              const EyeModel& eye) {
  const double ratio = t.l_pixel() * meta.mm_per_px / eye.radius_mm;
  if (!(ratio <= 1.0)) {
    throw PlanningError(ErrorCode::OutOfField, "click lies outside the hemisphere model");
  }
  const double theta = rad2deg(std::asin(ratio));
  const double phi = (t.x_px == 0.0 && t.y_px == 0.0) ? 0.0 : rad2deg(std::atan2(t.x_px, t.y_px));
  return SphericalPoint{180.0 - theta, phi}.normalized();
}

Eigen::Vector2d polar_to_raster(const SphericalPoint& p, const FundusImageMeta& meta,
                                const EyeModel& eye) {
  if (p.polar_deg < 90.0) {
    throw PlanningError(ErrorCode::OutOfField, "point is not on the posterior hemisphere");
  }
  const Vec3 q = spherical_to_cartesian(p, eye) - eye.center;
  return {meta.detected_center_px.x() + q.x() / meta.mm_per_px,
          meta.detected_center_px.y() - q.y() / meta.mm_per_px};
}

AxisCompensation AxisCompensation::derive(double kappa_deg, double nodal_offset_mm,
                                          const EyeModel& eye) {
  AxisCompensation c{kappa_deg, nodal_offset_mm, 0.0};
  c.kappa2_deg = solve_kappa2(c, eye);
  return c;
}

double solve_kappa2(const AxisCompensation& c, const EyeModel& eye) {
  // Optical axis along x with the posterior pole at x = +r; the visual axis
  // y = tan(kappa) (x + (l_nodal - r)) pivots about the nodal point.
  const double r = eye.radius_mm;
  const double t = std::tan(deg2rad(c.kappa_deg));
  const double offset = c.nodal_offset_mm - r;
  const double qa = 1.0 + t * t;
  const double qb = 2.0 * t * t * offset;
  const double qc = t * t * offset * offset - r * r;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) {
    throw PlanningError(ErrorCode::NoSolution, "visual axis misses the eye outline");
  }
  const double x = (-qb + std::sqrt(disc)) / (2.0 * qa);  // root nearest the posterior pole
  const double y = t * (x + offset);
  return rad2deg(std::asin(std::clamp(y / r, -1.0, 1.0)));
}

SphericalPoint compensate_visual_axis(const SphericalPoint& p, const AxisCompensation& c,
                                      const EyeModel& eye) {
  const Vec3 local = spherical_to_cartesian(p, eye) - eye.center;
  return direction_to_spherical(rot_x(c.kappa2_deg) * local);
}

GrayImage render_synthetic_fundus(const SyntheticFundusOptions& o) {
  GrayImage img(o.width, o.height, o.background);
  const double rx = o.diameter_px / 2.0;
  const double ry = rx * o.axis_ratio;
  const double fg = o.foreground;
  const double bg = o.background;
  constexpr int kSub = 4;
  for (int row = 0; row < o.height; ++row) {
    for (int col = 0; col < o.width; ++col) {
      const double dx = col - o.center_px.x();
      const double dy = row - o.center_px.y();
      const double rho = std::sqrt((dx / rx) * (dx / rx) + (dy / ry) * (dy / ry));
      double coverage = 0.0;
      if (rho < 1.0 - 2.0 / rx) {
        coverage = 1.0;
      } else if (rho < 1.0 + 2.0 / rx) {
        int inside = 0;
        for (int sy = 0; sy < kSub; ++sy) {
          for (int sx = 0; sx < kSub; ++sx) {
            const double px = dx + (sx + 0.5) / kSub - 0.5;
            const double py = dy + (sy + 0.5) / kSub - 0.5;
            if ((px / rx) * (px / rx) + (py / ry) * (py / ry) <= 1.0) ++inside;
          }
        }
        coverage = static_cast<double>(inside) / (kSub * kSub);
      }
      // Mild radial falloff toward the rim, as in real fundus photographs.
      const double shade = fg * (1.0 - 0.25 * std::min(rho, 1.0) * std::min(rho, 1.0));
      const double v = bg + coverage * (shade - bg);
      img.at(col, row) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  if (o.speckle_fraction > 0.0) {
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> level(0, 255);
    for (auto& p : img.pixels) {
      if (u01(rng) < o.speckle_fraction) p = static_cast<std::uint8_t>(level(rng));
    }
  }
  return img;
}

}  // namespace retina
