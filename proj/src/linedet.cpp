#include "auxmat/linedet.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"

#include "auxmat/parallel.hpp"
#include "auxmat/random.hpp"

namespace auxmat {

using std::numbers::pi;

double LineSegment::length() const { return std::hypot(x2 - x1, y2 - y1); }

// ---------------------------------------------------------------------------
// Homography

Homography::Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Homography::Homography(const std::array<double, 9>& m) : m_(m) {
  normalize();
  if (std::abs(determinant()) <= 1e-9) throw std::invalid_argument("Homography: singular matrix");
}

Homography Homography::translation(double tx, double ty) {
  return Homography({1, 0, tx, 0, 1, ty, 0, 0, 1});
}

void Homography::normalize() {
  if (m_[8] != 0.0 && m_[8] != 1.0) {
    const double s = m_[8];
    for (double& v : m_) v /= s;
  }
}

double Homography::determinant() const {
  const auto& a = m_;
  return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
         a[2] * (a[3] * a[7] - a[4] * a[6]);
}

Homography Homography::inverse() const {
  const auto& a = m_;
  const double det = determinant();
  std::array<double, 9> inv{
      (a[4] * a[8] - a[5] * a[7]) / det, (a[2] * a[7] - a[1] * a[8]) / det,
      (a[1] * a[5] - a[2] * a[4]) / det, (a[5] * a[6] - a[3] * a[8]) / det,
      (a[0] * a[8] - a[2] * a[6]) / det, (a[2] * a[3] - a[0] * a[5]) / det,
      (a[3] * a[7] - a[4] * a[6]) / det, (a[1] * a[6] - a[0] * a[7]) / det,
      (a[0] * a[4] - a[1] * a[3]) / det};
  return Homography(inv);
}

Homography Homography::operator*(const Homography& rhs) const {
  std::array<double, 9> out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += m_[3 * r + k] * rhs.m_[3 * k + c];
      out[3 * r + c] = acc;
    }
  }
  return Homography(out);
}

bool Homography::apply(double x, double y, double& ox, double& oy) const {
  const double w = m_[6] * x + m_[7] * y + m_[8];
  if (!(w > 1e-12)) return false;
  ox = (m_[0] * x + m_[1] * y + m_[2]) / w;
  oy = (m_[3] * x + m_[4] * y + m_[5]) / w;
  return std::isfinite(ox) && std::isfinite(oy);
}

Homography sample_homography(std::uint64_t seed, int height, int width, const HomographyParams& p) {
  if (p.scale_min <= 0.0 || p.scale_max < p.scale_min || p.max_rotation_deg < 0.0 ||
      p.max_perspective < 0.0 || p.max_translation < 0.0) {
    throw std::invalid_argument("sample_homography: invalid parameter ranges");
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) * (hi - lo) + lo;
  };
  const double rot = uniform(-p.max_rotation_deg, p.max_rotation_deg) * pi / 180.0;
  const double scale = uniform(p.scale_min, p.scale_max);
  const double half = 0.5 * std::max(height, width);
  const double px = uniform(-p.max_perspective, p.max_perspective) / half;
  const double py = uniform(-p.max_perspective, p.max_perspective) / half;
  const double reach = p.max_translation * std::min(height, width);
  const double tx = uniform(-reach, reach);
  const double ty = uniform(-reach, reach);

  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  const Homography to_centre = Homography::translation(-cx, -cy);
  const Homography from_centre = Homography::translation(cx + tx, cy + ty);
  const double c = std::cos(rot), s = std::sin(rot);
  const Homography rotate_scale({c * scale, -s * scale, 0, s * scale, c * scale, 0, 0, 0, 1});
  const Homography perspective({1, 0, 0, 0, 1, 0, px, py, 1});
  return from_centre * rotate_scale * perspective * to_centre;
}

// ---------------------------------------------------------------------------
// Warps

ImageF32 warp_image(const ImageF32& img, const Homography& h, BinaryMask* valid) {
  const Homography inv = h.inverse();
  const int height = img.height();
  const int width = img.width();
  const int ch = img.channels();
  ImageF32 out(height, width, ch);
  if (valid != nullptr) *valid = BinaryMask(height, width, 1);
  constexpr double kSlack = 1e-9;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double sx = 0, sy = 0;
      if (!inv.apply(x, y, sx, sy)) continue;
      if (sx < -kSlack || sy < -kSlack || sx > width - 1 + kSlack || sy > height - 1 + kSlack) continue;
      sx = std::clamp(sx, 0.0, static_cast<double>(width - 1));
      sy = std::clamp(sy, 0.0, static_cast<double>(height - 1));
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, width - 1);
      const int y1 = std::min(y0 + 1, height - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < ch; ++c) {
        const double top = img.at(y0, x0, c) + fx * (img.at(y0, x1, c) - img.at(y0, x0, c));
        const double bot = img.at(y1, x0, c) + fx * (img.at(y1, x1, c) - img.at(y1, x0, c));
        out.at(y, x, c) = static_cast<float>(top + fy * (bot - top));
      }
      if (valid != nullptr) valid->at(y, x) = 1.0f;
    }
  }
  return out;
}

std::vector<LineSegment> warp_segments(const std::vector<LineSegment>& segs, const Homography& h,
                                       int height, int width) {
  auto inside = [&](double x, double y) {
    return x >= -0.5 && y >= -0.5 && x <= width - 0.5 && y <= height - 0.5;
  };
  std::vector<LineSegment> out;
  out.reserve(segs.size());
  for (const LineSegment& s : segs) {
    LineSegment t;
    if (!h.apply(s.x1, s.y1, t.x1, t.y1) || !h.apply(s.x2, s.y2, t.x2, t.y2)) continue;
    if (!inside(t.x1, t.y1) && !inside(t.x2, t.y2)) continue;
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distance fields

double point_segment_distance(double px, double py, const LineSegment& s) {
  const double dx = s.x2 - s.x1;
  const double dy = s.y2 - s.y1;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - s.x1) * dx + (py - s.y1) * dy) / len2, 0.0, 1.0);
  return std::hypot(px - (s.x1 + t * dx), py - (s.y1 + t * dy));
}

DistanceField distance_field(const std::vector<LineSegment>& segs, int height, int width) {
  if (height < 1 || width < 1) throw std::invalid_argument("distance_field: empty frame");
  const float cap = static_cast<float>(height + width);
  DistanceField d(height, width, 1, cap);
  if (segs.empty()) return d;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double best = std::numeric_limits<double>::infinity();
      for (const LineSegment& s : segs) best = std::min(best, point_segment_distance(x, y, s));
      d.at(y, x) = static_cast<float>(best);
    }
  }
  return d;
}

ImageF32 line_activation(const DistanceField& d) {
  ImageF32 out(d.height(), d.width(), d.channels());
  auto src = d.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::exp(-0.5f * src[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Gradient and detection

GradientField grad_field(const ImageF32& gray) {
  if (gray.channels() != 1) throw std::invalid_argument("grad_field: expected one channel");
  const int h = gray.height();
  const int w = gray.width();
  GradientField g{ImageF32(h, w, 1), ImageF32(h, w, 1)};
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const double a = gray.at(y, x), b = gray.at(y, x + 1);
      const double c = gray.at(y + 1, x), d = gray.at(y + 1, x + 1);
      const double gx = 0.5 * (b - a + d - c);
      const double gy = 0.5 * (c - a + d - b);
      g.magnitude.at(y, x) = static_cast<float>(std::hypot(gx, gy));
      g.angle.at(y, x) = static_cast<float>(std::atan2(gx, -gy));
    }
  }
  return g;
}

namespace {

// Orientation distance modulo pi, in [0, pi/2].
double orientation_diff(double a, double b) { return std::abs(std::remainder(a - b, pi)); }

struct Rect {
  double cx, cy, dx, dy;  // centre and unit direction
  double lmin, lmax, wmin, wmax;
};

Rect fit_rect(const std::vector<int>& region, const ImageF32& mag, int width) {
  double sum = 0, cx = 0, cy = 0;
  for (int idx : region) {
    const double m = mag.data()[idx];
    cx += m * (idx % width + 0.5);
    cy += m * (idx / width + 0.5);
    sum += m;
  }
  cx /= sum;
  cy /= sum;
  double sxx = 0, syy = 0, sxy = 0;
  for (int idx : region) {
    const double m = mag.data()[idx];
    const double ux = idx % width + 0.5 - cx;
    const double uy = idx / width + 0.5 - cy;
    sxx += m * ux * ux;
    syy += m * uy * uy;
    sxy += m * ux * uy;
  }
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Rect r{cx, cy, std::cos(theta), std::sin(theta), 0, 0, 0, 0};
  r.lmin = r.wmin = std::numeric_limits<double>::infinity();
  r.lmax = r.wmax = -std::numeric_limits<double>::infinity();
  for (int idx : region) {
    const double ux = idx % width + 0.5 - cx;
    const double uy = idx / width + 0.5 - cy;
    const double l = ux * r.dx + uy * r.dy;
    const double n = -ux * r.dy + uy * r.dx;
    r.lmin = std::min(r.lmin, l);
    r.lmax = std::max(r.lmax, l);
    r.wmin = std::min(r.wmin, n);
    r.wmax = std::max(r.wmax, n);
  }
  return r;
}

double line_offset(const LineSegment& s, double px, double py) {
  const double len = s.length();
  return std::abs((s.x2 - s.x1) * (py - s.y1) - (s.y2 - s.y1) * (px - s.x1)) / len;
}

// Both flanks of a wide stroke grow as separate regions; fuse such pairs into their midline.
std::vector<LineSegment> merge_flanks(std::vector<LineSegment> segs, double max_gap, double tol) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < segs.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < segs.size() && !merged; ++j) {
        LineSegment a = segs[i], b = segs[j];
        const double dxa = a.x2 - a.x1, dya = a.y2 - a.y1;
        if ((b.x2 - b.x1) * dxa + (b.y2 - b.y1) * dya < 0) b = {b.x2, b.y2, b.x1, b.y1};
        const double ta = std::atan2(dya, dxa), tb = std::atan2(b.y2 - b.y1, b.x2 - b.x1);
        if (orientation_diff(ta, tb) > tol) continue;
        if (line_offset(a, 0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2)) > max_gap) continue;
        if (line_offset(b, 0.5 * (a.x1 + a.x2), 0.5 * (a.y1 + a.y2)) > max_gap) continue;
        const double la = a.length();
        auto proj = [&](double x, double y) { return ((x - a.x1) * dxa + (y - a.y1) * dya) / la; };
        const double lo = std::max(0.0, std::min(proj(b.x1, b.y1), proj(b.x2, b.y2)));
        const double hi = std::min(la, std::max(proj(b.x1, b.y1), proj(b.x2, b.y2)));
        if (hi - lo < 0.5 * std::min(la, b.length())) continue;
        segs[i] = {0.5 * (a.x1 + b.x1), 0.5 * (a.y1 + b.y1), 0.5 * (a.x2 + b.x2), 0.5 * (a.y2 + b.y2)};
        segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
      }
    }
  }
  return segs;
}

}  // namespace

std::vector<LineSegment> lsd_detect(const ImageF32& gray, const LsdParams& params, const BinaryMask* valid) {
  if (gray.channels() != 1) throw std::invalid_argument("lsd_detect: expected one channel");
  if (std::min(gray.height(), gray.width()) < 16) throw std::invalid_argument("lsd_detect: image side < 16");
  if (valid != nullptr) require_same_size(gray, *valid, "lsd_detect");
  if (params.mag_quantile < 0.0 || params.mag_quantile > 1.0 || params.angle_tol_deg <= 0.0) {
    throw std::invalid_argument("lsd_detect: invalid parameters");
  }
  const int h = gray.height();
  const int w = gray.width();
  GradientField g = grad_field(gray);
  if (valid != nullptr) {
    // A gradient at (x, y) reads pixels up to (x+1, y+1); keep a 2 px margin from warp borders.
    const BinaryMask keep = erode(*valid, 5);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (keep.at(y, x) == 0.0f || keep.clamped(y + 1, x + 1) == 0.0f) g.magnitude.at(y, x) = 0.0f;
      }
    }
  }
  auto mag = g.magnitude.data();
  auto ang = g.angle.data();

  std::vector<float> sorted(mag.begin(), mag.end());
  const std::size_t q = static_cast<std::size_t>(params.mag_quantile * (sorted.size() - 1));
  std::nth_element(sorted.begin(), sorted.begin() + q, sorted.end());
  const double threshold = std::max(params.min_magnitude, static_cast<double>(sorted[q]));

  std::vector<int> seeds;
  for (int i = 0; i < h * w; ++i) {
    if (mag[i] > threshold) seeds.push_back(i);
  }
  std::stable_sort(seeds.begin(), seeds.end(), [&](int a, int b) { return mag[a] > mag[b]; });

  const double tol = params.angle_tol_deg * pi / 180.0;
  std::vector<char> used(static_cast<std::size_t>(h) * w, 0);
  std::vector<LineSegment> out;
  std::vector<int> region;
  for (int seed : seeds) {
    if (used[seed]) continue;
    region.assign(1, seed);
    used[seed] = 1;
    double s2 = std::sin(2.0 * ang[seed]);
    double c2 = std::cos(2.0 * ang[seed]);
    double region_angle = ang[seed];
    for (std::size_t head = 0; head < region.size(); ++head) {
      const int px = region[head] % w;
      const int py = region[head] / w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = px + dx, ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int n = ny * w + nx;
          if (used[n] || mag[n] <= threshold) continue;
          if (orientation_diff(ang[n], region_angle) > tol) continue;
          used[n] = 1;
          region.push_back(n);
          s2 += std::sin(2.0 * ang[n]);
          c2 += std::cos(2.0 * ang[n]);
          region_angle = 0.5 * std::atan2(s2, c2);
        }
      }
    }
    if (region.size() < 3) continue;

    const Rect r = fit_rect(region, g.magnitude, w);
    const double length = r.lmax - r.lmin;
    if (length < params.min_length) continue;

    // Aligned-point density over the fitted rectangle.
    const double rect_angle = std::atan2(r.dy, r.dx);
    const double l0 = r.lmin, l1 = r.lmax, w0 = r.wmin, w1 = r.wmax;
    int total = 0, aligned = 0;
    const double reach = std::max(std::abs(l0), std::abs(l1)) + std::max(std::abs(w0), std::abs(w1));
    const int xa = std::max(0, static_cast<int>(std::floor(r.cx - reach)));
    const int xb = std::min(w - 1, static_cast<int>(std::ceil(r.cx + reach)));
    const int ya = std::max(0, static_cast<int>(std::floor(r.cy - reach)));
    const int yb = std::min(h - 1, static_cast<int>(std::ceil(r.cy + reach)));
    for (int y = ya; y <= yb; ++y) {
      for (int x = xa; x <= xb; ++x) {
        const double ux = x + 0.5 - r.cx, uy = y + 0.5 - r.cy;
        const double l = ux * r.dx + uy * r.dy;
        const double n = -ux * r.dy + uy * r.dx;
        if (l < l0 || l > l1 || n < w0 || n > w1) continue;
        ++total;
        const int i = y * w + x;
        if (mag[i] > threshold && orientation_diff(ang[i], rect_angle) <= tol) ++aligned;
      }
    }
    if (total == 0 || static_cast<double>(aligned) / total < params.min_density) continue;

    out.push_back({r.cx + r.dx * r.lmin, r.cy + r.dy * r.lmin, r.cx + r.dx * r.lmax, r.cy + r.dy * r.lmax});
  }
  if (params.flank_merge_gap > 0.0) out = merge_flanks(std::move(out), params.flank_merge_gap, 0.5 * tol);
  return out;
}

// ---------------------------------------------------------------------------
// Homography adaptation

std::uint64_t adaptation_seed(std::uint64_t seed, int index) {
  return derive_seed(seed, static_cast<std::uint64_t>(index));
}

DistanceField homography_adaptation(const ImageF32& gray, std::uint64_t seed, const AdaptationParams& params) {
  if (params.n < 1) throw std::invalid_argument("homography_adaptation: n must be >= 1");
  if (gray.channels() != 1) throw std::invalid_argument("homography_adaptation: expected one channel");
  const int h = gray.height();
  const int w = gray.width();
  const std::size_t n = static_cast<std::size_t>(params.n);
  std::vector<DistanceField> fields(n);
  parallel_for(n, [&](std::size_t i) {
    const Homography hom = sample_homography(adaptation_seed(seed, static_cast<int>(i)), h, w, params.homography);
    BinaryMask valid;
    const ImageF32 warped = warp_image(gray, hom, &valid);
    const auto segs = lsd_detect(warped, params.lsd, &valid);
    fields[i] = distance_field(warp_segments(segs, hom.inverse(), h, w), h, w);
  });

  DistanceField out(h, w, 1);
  std::vector<float> column(n);
  const std::size_t lower = (n - 1) / 2;
  for (std::size_t p = 0; p < out.size(); ++p) {
    for (std::size_t i = 0; i < n; ++i) column[i] = fields[i].data()[p];
    std::nth_element(column.begin(), column.begin() + lower, column.end());
    out.data()[p] = column[lower];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering and serialization

void render_stroke(ImageF32& img, const LineSegment& s, double width, float value) {
  const double half = 0.5 * width;
  const int xa = std::max(0, static_cast<int>(std::floor(std::min(s.x1, s.x2) - half - 1)));
  const int xb = std::min(img.width() - 1, static_cast<int>(std::ceil(std::max(s.x1, s.x2) + half + 1)));
  const int ya = std::max(0, static_cast<int>(std::floor(std::min(s.y1, s.y2) - half - 1)));
  const int yb = std::min(img.height() - 1, static_cast<int>(std::ceil(std::max(s.y1, s.y2) + half + 1)));
  for (int y = ya; y <= yb; ++y) {
    for (int x = xa; x <= xb; ++x) {
      const double cover = std::clamp(half + 0.5 - point_segment_distance(x, y, s), 0.0, 1.0);
      if (cover <= 0.0) continue;
      for (int c = 0; c < img.channels(); ++c) {
        float& px = img.at(y, x, c);
        px = static_cast<float>(px * (1.0 - cover) + value * cover);
      }
    }
  }
}

std::string segments_to_json(const std::vector<LineSegment>& segs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const LineSegment& s : segs) arr.push_back({{"x1", s.x1}, {"y1", s.y1}, {"x2", s.x2}, {"y2", s.y2}});
  return arr.dump(2);
}

std::vector<LineSegment> segments_from_json(const std::string& text) {
  const nlohmann::json arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw std::invalid_argument("segments_from_json: expected an array");
  std::vector<LineSegment> out;
  for (const auto& o : arr) {
    out.push_back({o.at("x1").get<double>(), o.at("y1").get<double>(), o.at("x2").get<double>(),
                   o.at("y2").get<double>()});
  }
  return out;
}

}  // namespace auxmat
