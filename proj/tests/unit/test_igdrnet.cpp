#include <cmath>
#include <set>

#include "auxmat/ad_loss.hpp"
#include "auxmat/igdrnet.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace auxmat;
using ad::Tensor;

namespace {

NetworkConfig small_config(InitScheme init = InitScheme::HeUniform) {
  NetworkConfig c;
  c.base_channels = 4;
  c.init = init;
  return c;
}

bool all_in_open_unit(const Tensor& t) {
  for (float v : t.value()) {
    if (!(v > 0.0f && v < 1.0f)) return false;
  }
  return true;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return std::equal(a.value().begin(), a.value().end(), b.value().begin(), b.value().end());
}

double sigmoid_ce(double z, double t) { return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

TEST_CASE("task names") {
  for (Task t : {Task::MattingData, Task::SegData, Task::BgLine}) CHECK(task_from_name(task_name(t)) == t);
  CHECK_THROWS_AS(task_from_name("depth"), std::invalid_argument);
}

TEST_CASE("network construction") {
  const NetworkConfig cfg;
  CHECK(Network(cfg, 3).checksum() == Network(cfg, 3).checksum());
  CHECK(Network(cfg, 3).checksum() != Network(cfg, 4).checksum());

  // 4221 b^2 + 477 b + 8, from the layer table by hand.
  for (int b : {1, 4, 8}) {
    NetworkConfig c;
    c.base_channels = b;
    CHECK(Network(c, 0).parameter_count() == static_cast<std::size_t>(4221 * b * b + 477 * b + 8));
  }
  CHECK(Network(cfg, 0).parameter_count() == 273968);

  const Network uni(small_config(InitScheme::Uniform), 1);
  const Tensor& w = const_cast<Network&>(uni).parameter("enc1.weight");
  const float bound = 1.0f / std::sqrt(4.0f * 9.0f);
  float hi = 0;
  for (float v : w.value()) hi = std::max(hi, std::abs(v));
  CHECK(hi <= bound);
  CHECK(hi > 0.5f * bound);

  const Network he(small_config(), 1);
  for (float v : const_cast<Network&>(he).parameter("offset.weight").value()) CHECK(v == 0.0f);

  CHECK_THROWS_AS(Network(NetworkConfig{0, 4}, 0), std::invalid_argument);
}

TEST_CASE("forward shapes and ranges") {
  const Network net(small_config(InitScheme::Uniform), 2);
  const ImageF32 img = oracle::random_image(32, 32, 3, 1);
  const BinaryMask g = oracle::random_mask(32, 32, 2);
  const NetworkOutputs out = net.forward(img, g);
  CHECK(out.seg_os8.shape() == ad::Shape{1, 4, 4});
  CHECK(out.alpha_os8.shape() == ad::Shape{1, 4, 4});
  CHECK(out.alpha_os4.shape() == ad::Shape{1, 8, 8});
  CHECK(out.alpha_os1.shape() == ad::Shape{1, 32, 32});
  CHECK(out.edge_os1.shape() == ad::Shape{1, 32, 32});
  CHECK(out.bgline_os1.shape() == ad::Shape{1, 32, 32});
  CHECK(out.igdr.offsets.shape() == ad::Shape{2, 4, 4});
  CHECK(out.igdr.se.shape() == out.ma.shape());
  CHECK(all_in_open_unit(out.alpha_os8));
  CHECK(all_in_open_unit(out.alpha_os1));
  CHECK(all_in_open_unit(out.bgline_os1));
  for (float v : out.seg_os8.value()) CHECK(std::isfinite(v));
  for (float v : out.edge_os1.value()) CHECK(std::isfinite(v));

  CHECK_THROWS_AS(net.forward(oracle::random_image(40, 32, 3, 1), ImageF32(40, 32, 1)), std::invalid_argument);
  CHECK_THROWS_AS(net.forward(ImageF32(32, 32, 1), g), std::invalid_argument);
}

TEST_CASE("igdr_forward") {
  const Tensor ma = to_tensor(oracle::random_image(6, 6, 3, 5));
  const Tensor ctx = to_tensor(oracle::random_image(2, 2, 5, 6));
  const Tensor zw = Tensor::zeros({2, 8, 3, 3}), zb = Tensor::zeros({2});

  const IgdrProducts p = igdr_forward(ma, ctx, zw, zb);
  for (float v : p.offsets.value()) CHECK(v == 0.0f);
  CHECK(same_values(p.se, ma));
  for (float v : p.in.value()) CHECK(v == 0.0f);

  ImageF32 ramp(6, 8, 3);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) ramp.at(y, x, c) = 0.5f * x;
    }
  }
  const Tensor rb = Tensor::constant({2}, {1.0f, 0.0f});
  const IgdrProducts r = igdr_forward(to_tensor(ramp), to_tensor(oracle::random_image(2, 2, 5, 7)), zw, rb);
  const ImageF32 in = to_image(r.in);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 7; ++x) CHECK(in.at(y, x, 1) == doctest::Approx(-0.5));
  }

  SUBCASE("gradient reaches the offset conv") {
    Network net(small_config(InitScheme::Uniform), 9);
    const NetworkOutputs out = net.forward(oracle::random_image(32, 32, 3, 3), oracle::random_mask(32, 32, 4));
    std::vector<float> zeros(out.igdr.in.numel(), 0.0f), ones(out.igdr.in.numel(), 1.0f);
    ad::masked_l1_loss(out.igdr.in, zeros, ones).backward();
    double norm = 0;
    for (float g : net.parameter("offset.weight").grad()) norm += std::abs(g);
    CHECK(norm > 0.0);
  }
}

TEST_CASE("head wiring") {
  const Network net(small_config(InitScheme::Uniform), 11);
  const ImageF32 img = oracle::random_image(32, 32, 3, 8);
  const BinaryMask g = oracle::random_mask(32, 32, 9);
  const NetworkOutputs out = net.forward(img, g);
  CHECK(out.seg_os8.depends_on(out.igdr.se));
  CHECK_FALSE(out.alpha_os8.depends_on(out.igdr.se));
  CHECK(out.alpha_os8.depends_on(out.ma));
  CHECK(out.alpha_os4.depends_on(out.igdr.in));
  CHECK(out.alpha_os1.depends_on(out.igdr.in));

  ForwardProbe zse;
  zse.zero_se = true;
  const NetworkOutputs a = net.forward(img, g, zse);
  CHECK(same_values(a.alpha_os8, out.alpha_os8));
  CHECK_FALSE(same_values(a.seg_os8, out.seg_os8));

  ForwardProbe zma;
  zma.zero_ma_after_split = true;
  const NetworkOutputs b = net.forward(img, g, zma);
  CHECK_FALSE(same_values(b.alpha_os8, out.alpha_os8));
  CHECK_FALSE(same_values(b.igdr.in, out.igdr.in));
}

TEST_CASE("task_loss") {
  SUBCASE("perfect matting predictions give zero") {
    SampleBundle s;
    s.task = Task::MattingData;
    s.image = ImageF32(32, 32, 3, 0.5f);
    s.guidance = ImageF32(32, 32, 1);
    s.alpha = ImageF32(32, 32, 1, 0.3f);
    NetworkOutputs o;
    o.alpha_os8 = Tensor::constant({1, 4, 4}, std::vector<float>(16, 0.3f));
    o.alpha_os4 = Tensor::constant({1, 8, 8}, std::vector<float>(64, 0.3f));
    o.alpha_os1 = Tensor::constant({1, 32, 32}, std::vector<float>(1024, 0.3f));
    const TaskLoss l = task_loss(o, s);
    CHECK(l.report.total == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(l.report.terms.size() == 6);
  }
  SUBCASE("hand-built 4x4 segmentation case") {
    SampleBundle s;
    s.task = Task::SegData;
    s.image = ImageF32(4, 4, 3, 0.5f);
    s.guidance = ImageF32(4, 4, 1);
    s.seg = oracle::random_mask(4, 4, 12, 0.5);
    s.edge = oracle::random_mask(4, 4, 13, 0.25);
    const ImageF32 zs = oracle::random_image(4, 4, 1, 14, -3.0f, 3.0f), ze = oracle::random_image(4, 4, 1, 15, -3.0f, 3.0f);
    NetworkOutputs o;
    o.seg_os8 = to_tensor(zs);
    o.edge_os1 = to_tensor(ze);
    double bce = 0, pos = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      bce += sigmoid_ce(zs.data()[i], s.seg->data()[i]);
      pos += s.edge->data()[i];
    }
    bce /= 16;
    double wce = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      const double t = s.edge->data()[i], z = ze.data()[i];
      wce += t == 1.0 ? (16 - pos) / 16 * sigmoid_ce(z, 1) : pos / 16 * sigmoid_ce(z, 0);
    }
    wce /= 16;
    const TaskLoss l = task_loss(o, s);
    CHECK(l.report.total == doctest::Approx(bce + wce).epsilon(1e-6));
    REQUIRE(l.report.terms.size() == 2);
    CHECK(l.report.terms[0].name == "seg_bce");
    CHECK(l.report.terms[0].value == doctest::Approx(bce).epsilon(1e-6));
  }
  SUBCASE("empty line region leaves the matting term") {
    SampleBundle s;
    s.task = Task::BgLine;
    s.image = ImageF32(32, 32, 3, 0.5f);
    s.guidance = ImageF32(32, 32, 1);
    s.alpha = ImageF32(32, 32, 1, 0.4f);
    s.distance = ImageF32(32, 32, 1, 64.0f);
    s.distance->at(5, 5) = 1.0f;
    s.bl = SupervisionMap::dense(ImageF32(32, 32, 1, 0.2f));
    s.bl->valid = ImageF32(32, 32, 1);
    NetworkOutputs o;
    o.bgline_os1 = Tensor::constant({1, 32, 32}, std::vector<float>(1024, 0.9f));
    o.alpha_os1 = Tensor::constant({1, 32, 32}, std::vector<float>(1024, 0.6f));
    const TaskLoss l = task_loss(o, s);
    CHECK(l.report.empty_line_support);
    CHECK_FALSE(l.report.empty_matting_support);
    CHECK(l.report.total == doctest::Approx(0.2));
  }
  SUBCASE("missing ground truth is rejected") {
    SampleBundle s;
    s.task = Task::SegData;
    s.image = ImageF32(4, 4, 3);
    s.guidance = ImageF32(4, 4, 1);
    CHECK_THROWS_AS(task_loss(NetworkOutputs{}, s), std::invalid_argument);
  }
}

TEST_CASE("synth_sample") {
  SynthOptions opts;
  opts.size = 32;
  opts.adaptation_n = 3;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (Task t : {Task::MattingData, Task::SegData, Task::BgLine}) {
      const SampleBundle s = synth_sample(t, seed, opts);
      CHECK(s.task == t);
      CHECK_NOTHROW(s.validate());
      CHECK(s.image.height() == 32);
      for (float v : s.image.data()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
      if (t == Task::BgLine) {
        for (std::size_t i = 0; i < s.alpha->size(); ++i) {
          if (s.alpha->data()[i] == 1.0f) {
            CHECK(s.bl->values.data()[i] == 0.0f);
            CHECK(s.bl->valid.data()[i] == 1.0f);
          }
        }
      }
    }
  }
  const SampleBundle a = synth_sample(Task::BgLine, 7, opts), b = synth_sample(Task::BgLine, 7, opts);
  CHECK(a.image == b.image);
  CHECK(a.alpha == b.alpha);
  CHECK(a.guidance == b.guidance);
  CHECK(a.bl->values == b.bl->values);
  CHECK(a.distance == b.distance);

  // Soft values along the filament borders.
  const SampleBundle m = synth_sample(Task::MattingData, 1);
  int soft = 0;
  for (float v : m.alpha->data()) soft += v > 0.0f && v < 1.0f;
  CHECK(soft > 0);
}

TEST_CASE("training") {
  SUBCASE("zero steps leave parameters") {
    TrainConfig cfg;
    cfg.net = small_config();
    cfg.steps = 0;
    const TrainResult r = train(cfg);
    CHECK(r.network.checksum() == Network(cfg.net, cfg.seed).checksum());
    CHECK(r.curve.empty());
  }
  SUBCASE("short runs are deterministic and finite") {
    TrainConfig cfg;
    cfg.net = small_config();
    cfg.steps = 6;
    cfg.sample_size = 32;
    cfg.adaptation_n = 2;
    const TrainResult a = train(cfg), b = train(cfg);
    CHECK(a.network.checksum() == b.network.checksum());
    CHECK(curve_to_csv(a.curve) == curve_to_csv(b.curve));
    CHECK_FALSE(a.non_finite_grad);
    CHECK(task_totals(a.curve, Task::BgLine).size() == 2);
    CHECK(curve_to_csv(a.curve).rfind("step,task,term,value\n", 0) == 0);
  }
  SUBCASE("one step per task keeps every gradient finite") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      Network net(small_config(InitScheme::Uniform), seed);
      for (Task t : {Task::MattingData, Task::SegData, Task::BgLine}) {
        SynthOptions o;
        o.size = 32;
        o.adaptation_n = 2;
        const SampleBundle s = synth_sample(t, seed, o);
        net.zero_grad();
        task_loss(net.forward(s.image, s.guidance), s).loss.backward();
        for (const Tensor& p : net.parameters()) {
          for (float gv : p.grad()) REQUIRE(std::isfinite(gv));
        }
      }
    }
  }
  CHECK(schedule_cycle({1, 1, 1}) == std::vector<Task>{Task::MattingData, Task::SegData, Task::BgLine});
  CHECK(schedule_cycle({2, 0, 1}) == std::vector<Task>{Task::MattingData, Task::MattingData, Task::BgLine});
  CHECK_THROWS_AS(schedule_cycle({0, 0, 0}), std::invalid_argument);
  CHECK(training_sample_seed(0, 1) != training_sample_seed(0, 2));

  const auto ends = smoothed_endpoints({1, 1, 3, 3}, 2);
  CHECK(ends.first == 1.0);
  CHECK(ends.second == 3.0);
  CHECK_THROWS_AS(smoothed_endpoints({1.0}, 2), std::invalid_argument);
}

TEST_CASE("train config JSON") {
  const TrainConfig c = TrainConfig::from_json(R"({"base_channels": 4, "steps": 12, "lr": 0.01, "seed": 5,
      "schedule": {"matting": 1, "seg": 1, "bgline": 0}, "sample_size": 32, "init": "uniform"})");
  CHECK(c.net.base_channels == 4);
  CHECK(c.steps == 12);
  CHECK(c.schedule == std::array<int, 3>{1, 1, 0});
  CHECK(c.net.init == InitScheme::Uniform);
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK_THROWS_AS(TrainConfig::from_json(R"({"sample_size": 40})"), std::invalid_argument);
  CHECK_THROWS_AS(TrainConfig::from_json(R"({"init": "xavier"})"), std::invalid_argument);
  CHECK_THROWS(TrainConfig::from_json("{"));
}

TEST_CASE("checkpoint restores the network") {
  const Network net(small_config(), 21);
  const Network back = Network::from_checkpoint(ad::decode_checkpoint(ad::encode_checkpoint(net.named_parameters())));
  CHECK(back.checksum() == net.checksum());
  CHECK(back.config().base_channels == 4);
  const ImageF32 img = oracle::random_image(32, 32, 3, 2);
  const BinaryMask g = oracle::random_mask(32, 32, 3);
  CHECK(infer_alpha(back, img, g) == infer_alpha(net, img, g));
}
