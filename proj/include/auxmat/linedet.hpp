#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "auxmat/image.hpp"

namespace auxmat {

/// Segment in continuous pixel coordinates; pixel (x, y) has its centre at (x, y).
struct LineSegment {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double length() const;
  friend bool operator==(const LineSegment&, const LineSegment&) = default;
};

/// 3x3 projective transform, row-major, scaled so m[8] == 1 when it is nonzero.
class Homography {
 public:
  Homography();  // identity
  explicit Homography(const std::array<double, 9>& m);

  static Homography translation(double tx, double ty);

  double operator()(int r, int c) const { return m_[3 * r + c]; }
  const std::array<double, 9>& matrix() const { return m_; }
  double determinant() const;
  Homography inverse() const;
  Homography operator*(const Homography& rhs) const;

  /// Maps (x, y); returns false when the point lands at or behind infinity.
  bool apply(double x, double y, double& ox, double& oy) const;

 private:
  void normalize();
  std::array<double, 9> m_;
};

/// Per-pixel distance (pixels) to the nearest line. Single-channel ImageF32.
using DistanceField = ImageF32;

struct GradientField {
  ImageF32 magnitude;
  ImageF32 angle;  // level-line angle, radians
};

/// 2x2 forward-difference gradient. The last row and column have no
/// forward neighbour and are reported with magnitude 0.
GradientField grad_field(const ImageF32& gray);

struct LsdParams {
  double angle_tol_deg = 22.5;
  double min_density = 0.7;
  double min_length = 8.0;
  double mag_quantile = 0.7;
  /// Absolute floor on the gradient threshold, for images whose quantile is 0.
  double min_magnitude = 0.02;
  /// Parallel overlapping segments closer than this are the two flanks of
  /// one stroke and are replaced by their midline. 0 disables.
  double flank_merge_gap = 4.0;
};

/// Simplified LSD: magnitude-ordered region growing on level-line orientation
/// (modulo pi, so both flanks of a thin stroke join one region), rectangle
/// fit from second moments, aligned-point density gate, flank merging.
///
/// `valid`, when given, marks pixels carrying real image content (e.g. after
/// a homography warp); gradients within 2 px of invalid pixels are ignored.
std::vector<LineSegment> lsd_detect(const ImageF32& gray, const LsdParams& params = {},
                                    const BinaryMask* valid = nullptr);

struct HomographyParams {
  double max_rotation_deg = 30.0;
  double scale_min = 0.7;
  double scale_max = 1.3;
  double max_perspective = 0.1;
  /// Fraction of min(H, W).
  double max_translation = 0.1;

  static HomographyParams identity() { return {0.0, 1.0, 1.0, 0.0, 0.0}; }
};

/// translate * rotate * scale * perspective, all about the image centre.
Homography sample_homography(std::uint64_t seed, int height, int width,
                             const HomographyParams& params = {});

/// Inverse-mapped bilinear warp; samples from outside the source are 0 and
/// reported as 0 in `valid` when requested.
ImageF32 warp_image(const ImageF32& img, const Homography& h, BinaryMask* valid = nullptr);

/// Maps endpoints through `h`. Segments with both endpoints outside the
/// height x width frame (or mapped through infinity) are dropped.
std::vector<LineSegment> warp_segments(const std::vector<LineSegment>& segs, const Homography& h,
                                       int height, int width);

double point_segment_distance(double px, double py, const LineSegment& s);

/// Exact distance to the nearest segment; H + W everywhere when `segs` is empty.
DistanceField distance_field(const std::vector<LineSegment>& segs, int height, int width);

/// Seed used for the index-th homography of an adaptation run.
std::uint64_t adaptation_seed(std::uint64_t seed, int index);

struct AdaptationParams {
  int n = 100;
  HomographyParams homography{};
  LsdParams lsd{};
};

/// Median (lower median for even n) over n warped-detect-unwarp distance fields.
DistanceField homography_adaptation(const ImageF32& gray, std::uint64_t seed,
                                    const AdaptationParams& params = {});

/// Pl = exp(-D / 2).
ImageF32 line_activation(const DistanceField& d);

/// Anti-aliased capsule stroke: pixels blend toward `value` by their coverage.
void render_stroke(ImageF32& img, const LineSegment& s, double width, float value);

std::string segments_to_json(const std::vector<LineSegment>& segs);
std::vector<LineSegment> segments_from_json(const std::string& text);

}  // namespace auxmat
