#include <cmath>
#include <numbers>

#include "auxmat/linedet.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace auxmat;

namespace {

ImageF32 stroke_image(const std::vector<LineSegment>& strokes) {
  ImageF32 img(64, 64, 1, 0.0f);
  for (const auto& s : strokes) render_stroke(img, s, 2.0, 1.0f);
  return img;
}

double angle_deg(const LineSegment& s) {
  double a = std::atan2(s.y2 - s.y1, s.x2 - s.x1) * 180.0 / std::numbers::pi;
  if (a < 0) a += 180.0;
  return a;
}

bool matches(const LineSegment& got, const LineSegment& want, double tol_px, double tol_deg) {
  const bool fwd = std::hypot(got.x1 - want.x1, got.y1 - want.y1) <= tol_px &&
                   std::hypot(got.x2 - want.x2, got.y2 - want.y2) <= tol_px;
  const bool rev = std::hypot(got.x1 - want.x2, got.y1 - want.y2) <= tol_px &&
                   std::hypot(got.x2 - want.x1, got.y2 - want.y1) <= tol_px;
  double da = std::abs(angle_deg(got) - angle_deg(want));
  da = std::min(da, 180.0 - da);
  return (fwd || rev) && da <= tol_deg;
}

}  // namespace

TEST_CASE("grad_field") {
  const GradientField flat = grad_field(ImageF32(8, 8, 1, 0.3f));
  for (float v : flat.magnitude.data()) CHECK(v == 0.0f);

  ImageF32 step(8, 8, 1);
  for (int y = 0; y < 8; ++y) {
    for (int x = 4; x < 8; ++x) step.at(y, x) = 1.0f;
  }
  const GradientField gs = grad_field(step);
  for (int y = 0; y < 7; ++y) {
    CHECK(gs.magnitude.at(y, 3) == doctest::Approx(1.0));
    // Level line runs vertically: angle is +-pi/2.
    CHECK(std::abs(std::abs(gs.angle.at(y, 3)) - std::numbers::pi / 2) < 1e-3);
  }

  const ImageF32 img = oracle::random_image(8, 8, 1, 21);
  const GradientField g = grad_field(img);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 7; ++x) {
      const double gx = (img.at(y, x + 1) - img.at(y, x) + img.at(y + 1, x + 1) - img.at(y + 1, x)) / 2.0;
      const double gy = (img.at(y + 1, x) - img.at(y, x) + img.at(y + 1, x + 1) - img.at(y, x + 1)) / 2.0;
      CHECK(std::abs(g.magnitude.at(y, x) - std::hypot(gx, gy)) < 1e-6);
      if (std::hypot(gx, gy) > 1e-3) CHECK(std::abs(g.angle.at(y, x) - std::atan2(gx, -gy)) < 1e-5);
    }
  }
  for (int i = 0; i < 8; ++i) {
    CHECK(g.magnitude.at(7, i) == 0.0f);
    CHECK(g.magnitude.at(i, 7) == 0.0f);
  }
}

TEST_CASE("lsd_detect") {
  SUBCASE("one stroke") {
    const LineSegment truth{10, 10, 50, 40};
    const auto segs = lsd_detect(stroke_image({truth}));
    REQUIRE(segs.size() == 1);
    CHECK(matches(segs[0], truth, 2.0, 2.0));
  }
  SUBCASE("constant image") {
    CHECK(lsd_detect(ImageF32(64, 64, 1, 0.5f)).empty());
  }
  SUBCASE("two perpendicular strokes") {
    const LineSegment a{8, 12, 56, 12}, b{30, 22, 30, 58};
    const auto segs = lsd_detect(stroke_image({a, b}));
    REQUIRE(segs.size() == 2);
    const bool direct = matches(segs[0], a, 2.0, 2.0) && matches(segs[1], b, 2.0, 2.0);
    const bool swapped = matches(segs[0], b, 2.0, 2.0) && matches(segs[1], a, 2.0, 2.0);
    CHECK((direct || swapped));
  }
  SUBCASE("deterministic and respects min_length") {
    const ImageF32 img = stroke_image({{10, 10, 50, 40}});
    CHECK(lsd_detect(img) == lsd_detect(img));
    LsdParams p;
    p.min_length = 80.0;
    CHECK(lsd_detect(img, p).empty());
  }
  CHECK_THROWS_AS(lsd_detect(ImageF32(8, 8, 1)), std::invalid_argument);
}

TEST_CASE("sample_homography") {
  const Homography id = sample_homography(7, 48, 64, HomographyParams::identity());
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) CHECK(id(r, c) == doctest::Approx(r == c ? 1.0 : 0.0));
  }
  CHECK(sample_homography(3, 64, 64).matrix() == sample_homography(3, 64, 64).matrix());
  CHECK_FALSE(sample_homography(3, 64, 64).matrix() == sample_homography(4, 64, 64).matrix());
  for (std::uint64_t s = 0; s < 1000; ++s) CHECK(std::abs(sample_homography(s, 64, 64).determinant()) > 1e-6);
}

TEST_CASE("warp_image and warp_segments") {
  const ImageF32 img = oracle::random_image(20, 24, 1, 5);
  BinaryMask valid;
  CHECK(warp_image(img, Homography(), &valid) == img);
  CHECK(valid == ImageF32(20, 24, 1, 1.0f));

  const ImageF32 shifted = warp_image(img, Homography::translation(2, 1), &valid);
  CHECK(shifted.at(5, 7) == img.at(4, 5));
  CHECK(shifted.at(0, 0) == 0.0f);
  CHECK(valid.at(0, 0) == 0.0f);
  CHECK(valid.at(5, 7) == 1.0f);

  const std::vector<LineSegment> s{{0, 0, 10, 0}};
  CHECK(warp_segments(s, Homography(), 64, 64) == s);
  const auto moved = warp_segments(s, Homography::translation(5, 3), 64, 64);
  REQUIRE(moved.size() == 1);
  CHECK(moved[0].x1 == doctest::Approx(5));
  CHECK(moved[0].y1 == doctest::Approx(3));
  CHECK(moved[0].x2 == doctest::Approx(15));
  CHECK(moved[0].y2 == doctest::Approx(3));

  CHECK(warp_segments(s, Homography::translation(500, 0), 64, 64).empty());

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Homography h = sample_homography(seed, 64, 64);
    const std::vector<LineSegment> in{{20, 22, 40, 35}, {12, 50, 30, 14}};
    const auto there = warp_segments(in, h, 64, 64);
    REQUIRE(there.size() == 2);
    const auto back = warp_segments(there, h.inverse(), 64, 64);
    REQUIRE(back.size() == 2);
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(back[i].x1 - in[i].x1) < 1e-6);
      CHECK(std::abs(back[i].y1 - in[i].y1) < 1e-6);
      CHECK(std::abs(back[i].x2 - in[i].x2) < 1e-6);
      CHECK(std::abs(back[i].y2 - in[i].y2) < 1e-6);
    }
  }
}

TEST_CASE("distance_field") {
  const DistanceField through = distance_field({{3, 4, 9, 4}}, 10, 12);
  CHECK(through.at(4, 6) == 0.0f);

  const DistanceField row = distance_field({{0, 20, 47, 20}}, 48, 48);
  for (int y = 0; y < 48; ++y) CHECK(row.at(y, 24) == doctest::Approx(std::abs(y - 20)));

  CHECK(distance_field({}, 7, 9) == ImageF32(7, 9, 1, 16.0f));

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-4.0, 52.0);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<LineSegment> segs;
    for (int i = 0; i < 5; ++i) segs.push_back({u(rng), u(rng), u(rng), u(rng)});
    const DistanceField d = distance_field(segs, 48, 48), ref = oracle::distance_brute(segs, 48, 48);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(d.data()[i] - ref.data()[i]) < 1e-5);

    std::uniform_int_distribution<int> pix(0, 47);
    for (int k = 0; k < 500; ++k) {
      const int y1 = pix(rng), x1 = pix(rng), y2 = pix(rng), x2 = pix(rng);
      CHECK(d.at(y1, x1) >= 0.0f);
      CHECK(std::abs(d.at(y1, x1) - d.at(y2, x2)) <= std::hypot(y1 - y2, x1 - x2) + 1e-5);
    }
  }
}

TEST_CASE("homography_adaptation") {
  const ImageF32 img = stroke_image({{10, 10, 50, 40}});
  SUBCASE("n=1 with identity equals a single detection") {
    AdaptationParams p;
    p.n = 1;
    p.homography = HomographyParams::identity();
    CHECK(homography_adaptation(img, 4, p) == distance_field(lsd_detect(img), 64, 64));
  }
  SUBCASE("constant image gives the cap everywhere") {
    AdaptationParams p;
    p.n = 3;
    CHECK(homography_adaptation(ImageF32(32, 32, 1, 0.5f), 1, p) == ImageF32(32, 32, 1, 64.0f));
  }
  SUBCASE("n=5 equals a recomputed median") {
    AdaptationParams p;
    p.n = 5;
    const std::uint64_t seed = 99;
    std::vector<DistanceField> fields;
    for (int i = 0; i < 5; ++i) {
      const Homography h = sample_homography(adaptation_seed(seed, i), 64, 64);
      BinaryMask valid;
      const ImageF32 warped = warp_image(img, h, &valid);
      fields.push_back(distance_field(warp_segments(lsd_detect(warped, {}, &valid), h.inverse(), 64, 64), 64, 64));
    }
    const DistanceField got = homography_adaptation(img, seed, p);
    for (std::size_t i = 0; i < got.size(); ++i) {
      std::vector<float> col;
      for (const auto& f : fields) col.push_back(f.data()[i]);
      std::sort(col.begin(), col.end());
      CHECK(got.data()[i] == col[2]);
    }
  }
  SUBCASE("even n takes the lower median") {
    AdaptationParams p;
    p.n = 4;
    const DistanceField got = homography_adaptation(img, 5, p);
    std::vector<DistanceField> fields;
    for (int i = 0; i < 4; ++i) {
      AdaptationParams one = p;
      one.n = 1;
      const Homography h = sample_homography(adaptation_seed(5, i), 64, 64);
      BinaryMask valid;
      const ImageF32 warped = warp_image(img, h, &valid);
      fields.push_back(distance_field(warp_segments(lsd_detect(warped, {}, &valid), h.inverse(), 64, 64), 64, 64));
    }
    for (std::size_t i = 0; i < got.size(); i += 37) {
      std::vector<float> col;
      for (const auto& f : fields) col.push_back(f.data()[i]);
      std::sort(col.begin(), col.end());
      CHECK(got.data()[i] == col[1]);
    }
  }
  AdaptationParams bad;
  bad.n = 0;
  CHECK_THROWS_AS(homography_adaptation(img, 0, bad), std::invalid_argument);
}

TEST_CASE("line_activation") {
  const ImageF32 d(1, 3, 1, std::vector<float>{0.0f, 2.0f, 40.0f});
  const ImageF32 pl = line_activation(d);
  CHECK(pl.at(0, 0) == 1.0f);
  CHECK(pl.at(0, 1) == doctest::Approx(0.367879).epsilon(1e-6));
  CHECK(pl.at(0, 2) > 0.0f);
  const ImageF32 r = oracle::random_image(10, 10, 1, 8, 0.0f, 30.0f);
  const ImageF32 pr = line_activation(r);
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < r.size(); j += 7) {
      if (r.data()[i] < r.data()[j]) CHECK(pr.data()[i] > pr.data()[j]);
    }
  }
}

TEST_CASE("segments JSON round trip") {
  const std::vector<LineSegment> segs{{1.5, 2.25, 3, 4}, {0, 0, 10, 0.125}};
  CHECK(segments_from_json(segments_to_json(segs)) == segs);
  CHECK(segments_from_json("[]").empty());
  CHECK_THROWS(segments_from_json("[{\"x1\": 1}]"));
}
