#include <cmath>
#include <filesystem>
#include <random>

#include "auxmat/ad_loss.hpp"
#include "auxmat/ad_ops.hpp"
#include "auxmat/autodiff.hpp"
#include "auxmat/gradcheck.hpp"
#include "auxmat/image_io.hpp"
#include "auxmat/optim.hpp"
#include "doctest.h"

using namespace auxmat::ad;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("conv2d forward") {
  const Tensor x = Tensor::constant({1, 4, 4}, std::vector<float>(16, 1.0f));
  const Tensor ones = Tensor::constant({1, 1, 3, 3}, std::vector<float>(9, 1.0f));
  const Tensor y = conv2d(x, ones, Tensor(), 1, 1);
  CHECK(y.shape() == Shape{1, 4, 4});
  CHECK(y.value()[1 * 4 + 1] == 9.0f);
  CHECK(y.value()[0] == 4.0f);

  const Tensor r = Tensor::constant({2, 3, 3}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 8, 7, 6, 5, 4, 3, 2, 1});
  const Tensor id = Tensor::constant({2, 2, 1, 1}, {1, 0, 0, 1});
  const Tensor same = conv2d(r, id, Tensor());
  for (std::size_t i = 0; i < r.numel(); ++i) CHECK(same.value()[i] == r.value()[i]);

  // Naive-loop reference with stride and padding.
  const int cin = 3, cout = 2, h = 7, w = 6, k = 3, stride = 2, pad = 1;
  const auto xv = random_values(cin * h * w, 1), wv = random_values(cout * cin * k * k, 2), bv = random_values(cout, 3);
  const Tensor64 out = conv2d(Tensor64::constant({cin, h, w}, xv), Tensor64::constant({cout, cin, k, k}, wv),
                              Tensor64::constant({cout}, bv), stride, pad);
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (w + 2 * pad - k) / stride + 1;
  REQUIRE(out.shape() == Shape{cout, ho, wo});
  for (int o = 0; o < cout; ++o) {
    for (int y = 0; y < ho; ++y) {
      for (int xx = 0; xx < wo; ++xx) {
        double acc = bv[o];
        for (int c = 0; c < cin; ++c) {
          for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
              const int sy = y * stride - pad + i, sx = xx * stride - pad + j;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              acc += wv[((o * cin + c) * k + i) * k + j] * xv[(c * h + sy) * w + sx];
            }
          }
        }
        CHECK(std::abs(out.value()[(o * ho + y) * wo + xx] - acc) < 1e-6);
      }
    }
  }
  CHECK_THROWS_AS(conv2d(x, Tensor::constant({1, 2, 3, 3}, std::vector<float>(18)), Tensor()), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(x, ones, Tensor(), 0, 1), std::invalid_argument);
}

TEST_CASE("elementwise and plumbing ops") {
  const Tensor v = Tensor::constant({1, 1, 2}, {-1.0f, 2.0f});
  CHECK(relu(v).value()[0] == 0.0f);
  CHECK(relu(v).value()[1] == 2.0f);
  const Tensor a = Tensor::zeros({2, 3, 3}), b = Tensor::zeros({3, 3, 3});
  CHECK(concat_channels(a, b).shape() == Shape{5, 3, 3});
  CHECK(slice_channels(concat_channels(a, b), 2, 5).shape() == Shape{3, 3, 3});
  const Tensor c = upsample_bilinear_2x(Tensor::constant({1, 3, 3}, std::vector<float>(9, 0.4f)));
  CHECK(c.shape() == Shape{1, 6, 6});
  for (float x : c.value()) CHECK(x == doctest::Approx(0.4f));
  const Tensor d = downsample_avg_2x(Tensor::constant({1, 2, 2}, {1, 2, 3, 4}));
  CHECK(d.value()[0] == 2.5f);
  CHECK(sigmoid(Tensor::constant({1}, {0.0f})).value()[0] == 0.5f);
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
}

TEST_CASE("finite-difference checks for every op") {
  const auto reports = auxmat::run_gradchecks();
  CHECK(reports.size() == auxmat::gradcheck_ops().size());
  for (const auto& r : reports) {
    INFO(r.op << " err " << r.max_rel_error);
    CHECK(r.checked > 0);
    CHECK(r.passed());
    CHECK(r.tolerance <= 1e-3);
  }
  CHECK_THROWS_AS(auxmat::run_gradchecks("nope"), std::invalid_argument);
}

TEST_CASE("finite_difference_check catches a wrong gradient") {
  // relu's subgradient away from its kink is exact; scaling the forward only breaks it.
  const ScalarFn good = [](const std::vector<Tensor64>& in) { return sum(mul(in[0], in[0])); };
  const std::vector<Tensor64> x{Tensor64::parameter({1, 2, 2}, {0.3, -0.7, 1.1, 0.2})};
  CHECK(finite_difference_check(good, x).max_rel_error < 1e-8);
  const ScalarFn bad = [](const std::vector<Tensor64>& in) {
    auto v = std::vector<double>(in[0].value().begin(), in[0].value().end());
    double s = 0;
    for (double t : v) s += t * t * t;
    // Value does not match what backward differentiates.
    return add(sum(mul(in[0], in[0])), Tensor64::scalar(s));
  };
  CHECK(finite_difference_check(bad, x).max_rel_error > 1e-2);
}

TEST_CASE("warp_with_offsets") {
  const auto mv = random_values(3 * 6 * 5, 4);
  const Tensor64 ma = Tensor64::constant({3, 6, 5}, mv);
  const Tensor64 zero = Tensor64::zeros({2, 6, 5});
  const Tensor64 same = warp_with_offsets(ma, zero);
  for (std::size_t i = 0; i < mv.size(); ++i) CHECK(same.value()[i] == mv[i]);

  std::vector<double> ramp(1 * 4 * 8);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) ramp[y * 8 + x] = x;
  }
  std::vector<double> off(2 * 4 * 8, 0.0);
  std::fill(off.begin(), off.begin() + 32, 1.0);
  const Tensor64 se = warp_with_offsets(Tensor64::constant({1, 4, 8}, ramp), Tensor64::constant({2, 4, 8}, off));
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 7; ++x) CHECK(se.value()[y * 8 + x] == doctest::Approx(x + 1));
    CHECK(se.value()[y * 8 + 7] == doctest::Approx(7));
  }

  // Linear in Ma for fixed offsets.
  const Tensor64 delta = Tensor64::constant({2, 6, 5}, random_values(2 * 6 * 5, 5, -2, 2));
  const auto m2 = random_values(mv.size(), 6);
  std::vector<double> mix(mv.size());
  for (std::size_t i = 0; i < mv.size(); ++i) mix[i] = 0.3 * mv[i] - 1.7 * m2[i];
  const Tensor64 lhs = warp_with_offsets(Tensor64::constant({3, 6, 5}, mix), delta);
  const Tensor64 w1 = warp_with_offsets(ma, delta), w2 = warp_with_offsets(Tensor64::constant({3, 6, 5}, m2), delta);
  for (std::size_t i = 0; i < mix.size(); ++i) CHECK(std::abs(lhs.value()[i] - (0.3 * w1.value()[i] - 1.7 * w2.value()[i])) < 1e-6);

  CHECK_THROWS_AS(warp_with_offsets(ma, Tensor64::zeros({2, 5, 5})), std::invalid_argument);
  CHECK_THROWS_AS(warp_with_offsets(ma, Tensor64::zeros({3, 6, 5})), std::invalid_argument);
}

TEST_CASE("losses") {
  const Tensor p = Tensor::constant({1, 2, 2}, {0.1f, 0.5f, 0.9f, 0.3f});
  CHECK(l1_loss(p, p).item() == 0.0f);
  CHECK(laplacian_loss(p, p).item() == 0.0f);

  const Tensor z = Tensor::constant({1, 1, 1}, {0.0f}), half = Tensor::constant({1, 1, 1}, {0.5f});
  CHECK(bce_loss(z, half).item() == doctest::Approx(0.693147).epsilon(1e-6));

  const Tensor extreme = Tensor::parameter({1, 1, 4}, {-80.0f, 80.0f, -80.0f, 80.0f});
  const Tensor tgt = Tensor::constant({1, 1, 4}, {1.0f, 0.0f, 0.0f, 1.0f});
  const Tensor b = bce_loss(extreme, tgt);
  CHECK(std::isfinite(b.item()));
  CHECK(b.item() == doctest::Approx(40.0));
  b.backward();
  for (float g : extreme.grad()) CHECK(std::isfinite(g));

  // Balanced mask: weighted CE is half the unweighted BCE.
  const Tensor logits = Tensor::constant({1, 2, 2}, {0.3f, -1.2f, 2.0f, 0.1f});
  const Tensor edges = Tensor::constant({1, 2, 2}, {1, 0, 1, 0});
  CHECK(weighted_ce_edge_loss(logits, edges).item() == doctest::Approx(0.5 * bce_loss(logits, edges).item()).epsilon(1e-6));

  const auto av = random_values(64, 7, 0, 1), bv = random_values(64, 8, 0, 1);
  const Tensor64 a = Tensor64::constant({1, 8, 8}, av), c = Tensor64::constant({1, 8, 8}, bv);
  CHECK(std::abs(laplacian_loss(a, c).item() - laplacian_loss(c, a).item()) < 1e-9);
  CHECK(laplacian_loss(a, c).item() > 0.0);

  bool empty = false;
  const Tensor m = masked_l1_loss(p, std::vector<float>(4, 1.0f), std::vector<float>(4, 0.0f), &empty);
  CHECK(empty);
  CHECK(m.item() == 0.0f);
  const Tensor m2 = masked_l1_loss(p, std::vector<float>(4, 1.0f), std::vector<float>{1, 0, 0, 1}, &empty);
  CHECK_FALSE(empty);
  CHECK(m2.item() == doctest::Approx((0.9 + 0.7) / 2));
}

TEST_CASE("backward accumulates over a diamond") {
  const Tensor64 x = Tensor64::parameter({1}, {1.5});
  const Tensor64 a = scale(x, 2.0);
  const Tensor64 b = mul(x, x);
  const Tensor64 z = sum(add(mul(a, b), a));  // 2x^3 + 2x
  z.backward();
  CHECK(x.grad()[0] == doctest::Approx(6 * 1.5 * 1.5 + 2));
  CHECK(z.depends_on(x));
  CHECK_FALSE(a.depends_on(b));

  // A second backward from a fresh graph accumulates into the leaf.
  sum(a).backward();
  CHECK(x.grad()[0] == doctest::Approx(6 * 1.5 * 1.5 + 2 + 2));

  const Tensor64 c = Tensor64::constant({1}, {2.0});
  CHECK_FALSE(mul(c, c).requires_grad());
  CHECK_THROWS_AS(Tensor64::zeros({2}).backward(), std::logic_error);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters") {
    Tensor p = Tensor::parameter({3}, {0.1f, -0.2f, 0.3f});
    std::vector<Tensor> params{p};
    AdamState st;
    adam_step(params, st);
    CHECK(p.value()[0] == 0.1f);
    CHECK(p.value()[1] == -0.2f);
    CHECK(st.step == 1);
  }
  SUBCASE("first step closed form") {
    Tensor p = Tensor::parameter({2}, {1.0f, 1.0f});
    sum(mul(p, Tensor::constant({2}, {3.0f, -0.5f}))).backward();
    std::vector<Tensor> params{p};
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_step(params, st, cfg);
    CHECK(p.value()[0] == doctest::Approx(1.0 - 0.01 * 3.0 / (3.0 + 1e-8)));
    CHECK(p.value()[1] == doctest::Approx(1.0 + 0.01 * 0.5 / (0.5 + 1e-8)));
    CHECK(st.m[0][0] == doctest::Approx(0.3));
    CHECK(st.v[0][0] == doctest::Approx(0.001 * 9));
  }
  SUBCASE("deterministic trajectories") {
    auto run = [] {
      Tensor p = Tensor::parameter({4}, {0.5f, -1.0f, 2.0f, 0.0f});
      std::vector<Tensor> params{p};
      AdamState st;
      for (int i = 0; i < 50; ++i) {
        p.zero_grad();
        sum(mul(mul(p, p), Tensor::constant({4}, {1, 2, 3, 4}))).backward();
        adam_step(params, st);
      }
      return std::vector<float>(p.value().begin(), p.value().end());
    };
    CHECK(run() == run());
  }
}

TEST_CASE("checkpoint round trip") {
  const std::vector<NamedTensor> entries{
      {"enc0.weight", Tensor::constant({2, 1, 3, 3}, std::vector<float>{1, -2, 3, 4, 5, 6, 7, 8, 9, -0.0f, 1e-30f, 3, 4, 5, 6, 7, 8, 9})},
      {"enc0.bias", Tensor::constant({2}, {0.25f, -0.5f})},
  };
  const std::string bytes = encode_checkpoint(entries);
  CHECK(bytes.substr(0, 4) == "CKPT");
  CHECK(static_cast<unsigned char>(bytes[4]) == 2);
  const auto back = decode_checkpoint(bytes);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].first == entries[i].first);
    CHECK(back[i].second.shape() == entries[i].second.shape());
    for (std::size_t j = 0; j < entries[i].second.numel(); ++j) {
      CHECK(std::bit_cast<std::uint32_t>(back[i].second.value()[j]) ==
            std::bit_cast<std::uint32_t>(entries[i].second.value()[j]));
    }
  }
  CHECK_THROWS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)));
  CHECK_THROWS(decode_checkpoint("XXXX" + bytes.substr(4)));

  const auto dir = std::filesystem::temp_directory_path() / "auxmat_test_ckpt";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "a.ckpt", entries);
  CHECK(load_checkpoint(dir / "a.ckpt").size() == 2);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), auxmat::IoError);
}
