#include "auxmat/igdrnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "auxmat/ad_loss.hpp"
#include "auxmat/compositor.hpp"
#include "auxmat/random.hpp"
#include "json.hpp"

namespace auxmat {

using ad::Tensor;

const char* task_name(Task t) {
  switch (t) {
    case Task::MattingData:
      return "matting";
    case Task::SegData:
      return "seg";
    case Task::BgLine:
      return "bgline";
  }
  return "?";
}

Task task_from_name(const std::string& name) {
  if (name == "matting") return Task::MattingData;
  if (name == "seg") return Task::SegData;
  if (name == "bgline") return Task::BgLine;
  throw std::invalid_argument("unknown task '" + name + "' (expected matting, seg or bgline)");
}

// ---------------------------------------------------------------------------
// Tensor <-> image

Tensor to_tensor(const ImageF32& img) {
  const int c = img.channels(), h = img.height(), w = img.width();
  std::vector<float> planar(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) planar[(static_cast<std::size_t>(k) * h + y) * w + x] = img.at(y, x, k);
    }
  }
  return Tensor::constant({c, h, w}, std::move(planar));
}

ImageF32 to_image(const Tensor& t) {
  if (t.rank() != 3) throw std::invalid_argument("to_image: expected (C,H,W)");
  const int c = t.channels(), h = t.height(), w = t.width();
  ImageF32 img(h, w, c);
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) img.at(y, x, k) = t.value()[(static_cast<std::size_t>(k) * h + y) * w + x];
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// IGDR

IgdrProducts igdr_forward(const Tensor& ma, const Tensor& context_os32, const Tensor& offset_weight,
                          const Tensor& offset_bias) {
  const Tensor context = ad::upsample_bilinear(context_os32, ma.height(), ma.width());
  IgdrProducts p;
  p.offsets = ad::conv2d(ad::concat_channels(ma, context), offset_weight, offset_bias, 1, 1);
  p.se = ad::warp_with_offsets(ma, p.offsets);
  p.in = ad::sub(ma, p.se);
  return p;
}

// ---------------------------------------------------------------------------
// Network

namespace {

struct LayerSpec {
  const char* name;
  int cin;   // multiples of base_channels (negative: absolute)
  int cout;
};

int resolve(int units, int base) { return units < 0 ? -units : units * base; }

// Input channels of enc0 are cfg.in_channels; everything else scales with the base width.
constexpr LayerSpec kLayers[] = {
    {"enc1", 1, 2},   {"enc2", 2, 4},   {"enc3", 4, 8},    {"enc4", 8, 8},     {"enc5", 8, 12},
    {"dec16", 20, 8}, {"dec8", 16, 4},  {"offset", 16, -2}, {"dec4", 12, 2},   {"dec2", 4, 1},
    {"dec1", 6, 1},   {"head_alpha8", 4, -1}, {"seg_hidden", 4, 2}, {"head_seg8", 2, -1}, {"head_alpha4", 2, -1},
    {"head_alpha1", 1, -1}, {"edge_hidden", 1, 1}, {"head_edge1", 1, -1}, {"head_bgline1", 1, -1},
};

}  // namespace

Network::Network(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.base_channels < 1 || cfg.in_channels < 1) throw std::invalid_argument("NetworkConfig: invalid widths");
  std::uint64_t stream = 0;
  add_conv("enc0", cfg.in_channels, cfg.base_channels, derive_seed(seed, stream++));
  for (const LayerSpec& l : kLayers) {
    add_conv(l.name, resolve(l.cin, cfg.base_channels), resolve(l.cout, cfg.base_channels), derive_seed(seed, stream++));
  }
}

void Network::add_conv(const std::string& name, int cin, int cout, std::uint64_t seed) {
  const int fan_in = cin * 9;
  const bool he = cfg_.init == InitScheme::HeUniform;
  const float s = (he ? std::sqrt(6.0f) : 1.0f) / std::sqrt(static_cast<float>(fan_in));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-s, s);
  std::vector<float> weight(static_cast<std::size_t>(cout) * cin * 9);
  std::vector<float> bias(static_cast<std::size_t>(cout), 0.0f);
  // He init starts the offset branch at zero, so Se = Ma at step 0.
  if (!(he && name == "offset")) {
    for (float& v : weight) v = u(rng);
  }
  if (!he) {
    for (float& v : bias) v = u(rng);
  }
  names_.push_back(name + ".weight");
  params_.push_back(Tensor::parameter({cout, cin, 3, 3}, std::move(weight), name + ".weight"));
  names_.push_back(name + ".bias");
  params_.push_back(Tensor::parameter({cout}, std::move(bias), name + ".bias"));
}

Network Network::from_checkpoint(const std::vector<ad::NamedTensor>& entries) {
  const auto first = std::find_if(entries.begin(), entries.end(), [](const auto& e) { return e.first == "enc0.weight"; });
  if (first == entries.end()) throw std::invalid_argument("checkpoint has no enc0.weight");
  NetworkConfig cfg;
  cfg.base_channels = first->second.dim(0);
  cfg.in_channels = first->second.dim(1);
  Network net(cfg, 0);
  if (entries.size() != net.params_.size()) throw std::invalid_argument("checkpoint parameter count mismatch");
  for (const auto& [name, t] : entries) {
    Tensor& p = net.parameter(name);
    if (p.shape() != t.shape()) throw std::invalid_argument("checkpoint shape mismatch for " + name);
    std::copy(t.value().begin(), t.value().end(), p.mutable_value().begin());
  }
  return net;
}

std::vector<ad::NamedTensor> Network::named_parameters() const {
  std::vector<ad::NamedTensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) out.emplace_back(names_[i], params_[i]);
  return out;
}

Tensor& Network::parameter(const std::string& name) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return params_[i];
  }
  throw std::out_of_range("no parameter named " + name);
}

const Tensor& Network::w(const std::string& layer) const {
  return const_cast<Network*>(this)->parameter(layer + ".weight");
}

const Tensor& Network::b(const std::string& layer) const {
  return const_cast<Network*>(this)->parameter(layer + ".bias");
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& p : params_) n += p.numel();
  return n;
}

std::uint64_t Network::checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const Tensor& p : params_) {
    for (float v : p.value()) {
      h ^= std::bit_cast<std::uint32_t>(v);
      h *= 0x100000001B3ull;
    }
  }
  return h;
}

void Network::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

Tensor Network::conv(const std::string& layer, const Tensor& x, int stride) const {
  return ad::conv2d(x, w(layer), b(layer), stride, 1);
}

NetworkOutputs Network::forward(const ImageF32& image, const BinaryMask& guidance, const ForwardProbe& probe) const {
  if (image.channels() != 3) throw std::invalid_argument("Network::forward: image must be RGB");
  require_same_size(image, guidance, "Network::forward");
  if (image.height() % HeadTopology::max_stride || image.width() % HeadTopology::max_stride) {
    throw std::invalid_argument("Network::forward: sides must be multiples of 32");
  }
  const Tensor x = ad::concat_channels(to_tensor(image), to_tensor(guidance));
  if (x.channels() != cfg_.in_channels) throw std::invalid_argument("Network::forward: input channel mismatch");

  const Tensor e1 = ad::relu(conv("enc0", x));
  const Tensor e2 = ad::relu(conv("enc1", e1, 2));
  const Tensor e4 = ad::relu(conv("enc2", e2, 2));
  const Tensor e8 = ad::relu(conv("enc3", e4, 2));
  const Tensor e16 = ad::relu(conv("enc4", e8, 2));
  const Tensor e32 = ad::relu(conv("enc5", e16, 2));

  const Tensor d16 = ad::relu(conv("dec16", ad::concat_channels(ad::upsample_bilinear_2x(e32), e16)));
  Tensor ma = ad::relu(conv("dec8", ad::concat_channels(ad::upsample_bilinear_2x(d16), e8)));

  NetworkOutputs out;
  out.igdr = igdr_forward(ma, e32, w("offset"), b("offset"));
  Tensor se = out.igdr.se;
  if (probe.zero_se) se = Tensor::zeros(se.shape());
  if (probe.zero_ma_after_split) {
    ma = Tensor::zeros(ma.shape());
    out.igdr.in = ad::sub(ma, out.igdr.se);
  }
  out.ma = ma;
  const Tensor& in = out.igdr.in;

  out.alpha_os8 = ad::sigmoid(conv("head_alpha8", ma));
  out.seg_os8 = conv("head_seg8", ad::relu(conv("seg_hidden", se)));

  const Tensor d4 = ad::relu(conv(
      "dec4", ad::concat_channels(ad::concat_channels(ad::upsample_bilinear_2x(ma), e4), ad::upsample_bilinear_2x(in))));
  out.alpha_os4 = ad::sigmoid(conv("head_alpha4", d4));

  const Tensor d2 = ad::relu(conv("dec2", ad::concat_channels(ad::upsample_bilinear_2x(d4), e2)));
  const Tensor in_os1 = ad::upsample_bilinear(in, e1.height(), e1.width());
  const Tensor d1 =
      ad::relu(conv("dec1", ad::concat_channels(ad::concat_channels(ad::upsample_bilinear_2x(d2), e1), in_os1)));
  out.alpha_os1 = ad::sigmoid(conv("head_alpha1", d1));
  out.edge_os1 = conv("head_edge1", ad::relu(conv("edge_hidden", d1)));
  out.bgline_os1 = ad::sigmoid(conv("head_bgline1", d1));
  return out;
}

// ---------------------------------------------------------------------------
// Samples

void SampleBundle::validate() const {
  if (image.channels() != 3) throw std::invalid_argument("SampleBundle: image must be RGB");
  require_binary(guidance, "SampleBundle guidance");
  require_same_size(image, guidance, "SampleBundle");
  auto check_alpha = [&] {
    if (!alpha) throw std::invalid_argument("SampleBundle: task needs alpha");
    require_same_size(image, *alpha, "SampleBundle alpha");
    for (float a : alpha->data()) {
      if (!(a >= 0.0f && a <= 1.0f)) throw std::invalid_argument("SampleBundle: alpha outside [0,1]");
    }
  };
  switch (task) {
    case Task::MattingData:
      check_alpha();
      break;
    case Task::SegData:
      if (!seg || !edge) throw std::invalid_argument("SampleBundle: segmentation task needs seg and edge");
      require_binary(*seg, "SampleBundle seg");
      require_binary(*edge, "SampleBundle edge");
      require_same_size(image, *seg, "SampleBundle seg");
      require_same_size(image, *edge, "SampleBundle edge");
      break;
    case Task::BgLine:
      check_alpha();
      if (!bl || !distance) throw std::invalid_argument("SampleBundle: background-line task needs bl and distance");
      require_same_size(image, bl->values, "SampleBundle bl");
      require_binary(bl->valid, "SampleBundle bl valid");
      require_same_size(image, *distance, "SampleBundle distance");
      for (float d : distance->data()) {
        if (!(d >= 0.0f)) throw std::invalid_argument("SampleBundle: negative distance");
      }
      break;
  }
}

namespace {

class Procedural {
 public:
  explicit Procedural(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

 private:
  std::mt19937_64 rng_;
};

ImageF32 synth_alpha(Procedural& r, int size) {
  ImageF32 alpha(size, size, 1);
  const int blobs = r.integer(1, 3);
  struct Blob {
    double cx, cy, rx, ry;
  };
  std::vector<Blob> placed;
  for (int i = 0; i < blobs; ++i) {
    Blob bl{r.uniform(0.35, 0.65) * size, r.uniform(0.35, 0.65) * size, r.uniform(0.25, 0.38) * size,
            r.uniform(0.25, 0.38) * size};
    const double rot = r.uniform(0.0, std::numbers::pi);
    const double c = std::cos(rot), s = std::sin(rot);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double u = (x - bl.cx) * c + (y - bl.cy) * s;
        const double v = -(x - bl.cx) * s + (y - bl.cy) * c;
        const double d = (std::sqrt((u / bl.rx) * (u / bl.rx) + (v / bl.ry) * (v / bl.ry)) - 1.0) * std::min(bl.rx, bl.ry);
        const float a = static_cast<float>(std::clamp(0.5 - d / 1.5, 0.0, 1.0));
        alpha.at(y, x) = std::max(alpha.at(y, x), a);
      }
    }
    placed.push_back(bl);
  }
  // Thin filaments growing out of the first blob.
  const int filaments = r.integer(1, 2);
  for (int i = 0; i < filaments; ++i) {
    const Blob& bl = placed.front();
    const double dir = r.uniform(0.0, 2.0 * std::numbers::pi);
    const double reach = 0.8 * std::min(bl.rx, bl.ry);
    const double len = r.uniform(8.0, 20.0);
    const LineSegment s{bl.cx + reach * std::cos(dir), bl.cy + reach * std::sin(dir),
                        bl.cx + (reach + len) * std::cos(dir), bl.cy + (reach + len) * std::sin(dir)};
    render_stroke(alpha, s, r.uniform(1.0, 2.0), 1.0f);
  }
  return alpha;
}

ImageF32 synth_background(Procedural& r, int size) {
  ImageF32 coarse(4, 4, 1);
  for (float& v : coarse.data()) v = static_cast<float>(r.uniform(0.45, 0.85));
  ImageF32 gray = resize_bilinear(coarse, size, size);
  const int strokes = r.integer(2, 5);
  for (int i = 0; i < strokes; ++i) {
    const double cx = r.uniform(0.15, 0.85) * size, cy = r.uniform(0.15, 0.85) * size;
    const double angle = r.uniform(0.0, std::numbers::pi);
    const double half = 0.5 * r.uniform(0.4, 0.9) * size;
    const LineSegment s{cx - half * std::cos(angle), cy - half * std::sin(angle), cx + half * std::cos(angle),
                        cy + half * std::sin(angle)};
    render_stroke(gray, s, r.uniform(1.5, 2.0), static_cast<float>(r.uniform(0.05, 0.15)));
  }
  ImageF32 rgb(size, size, 3);
  const float tint[3] = {static_cast<float>(r.uniform(0.75, 1.0)), static_cast<float>(r.uniform(0.75, 1.0)),
                         static_cast<float>(r.uniform(0.75, 1.0))};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = gray.at(y, x) * tint[c];
    }
  }
  return rgb;
}

ImageF32 synth_foreground(Procedural& r, int size) {
  ImageF32 fg(size, size, 3);
  // Saturated hue so the object stands out from the near-gray background.
  float base[3], slope[3];
  const int dominant = r.integer(0, 2);
  for (int c = 0; c < 3; ++c) {
    base[c] = static_cast<float>(c == dominant ? r.uniform(0.8, 1.0) : r.uniform(0.0, 0.25));
    slope[c] = static_cast<float>(r.uniform(-0.1, 0.1));
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        fg.at(y, x, c) = std::clamp(base[c] + slope[c] * (static_cast<float>(y) / size - 0.5f), 0.0f, 1.0f);
      }
    }
  }
  return fg;
}

}  // namespace

SampleBundle synth_sample(Task task, std::uint64_t seed, const SynthOptions& opts) {
  if (opts.size < 16) throw std::invalid_argument("synth_sample: size must be >= 16");
  Procedural r(derive_seed(seed, 0));
  const ImageF32 alpha = synth_alpha(r, opts.size);
  const ImageF32 bg = synth_background(r, opts.size);
  const ImageF32 fg = synth_foreground(r, opts.size);

  SampleBundle s;
  s.task = task;
  s.image = composite(fg, bg, alpha);

  std::optional<DistanceField> distance;
  if (task == Task::BgLine) {
    AdaptationParams ap;
    ap.n = opts.adaptation_n;
    distance = homography_adaptation(to_gray(bg), derive_seed(seed, 1), ap);
  }
  s.guidance = perturb_guidance(make_guidance(alpha), distance ? &*distance : nullptr, derive_seed(seed, 2));

  switch (task) {
    case Task::MattingData:
      s.alpha = alpha;
      break;
    case Task::SegData:
      s.seg = threshold_mask(alpha, 0.5f);
      s.edge = edge_from_mask(*s.seg);
      break;
    case Task::BgLine:
      s.alpha = alpha;
      s.bl = background_line_gt(line_activation(*distance), alpha);
      s.distance = std::move(distance);
      break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Losses

namespace {

Tensor target_like(const Tensor& pred, const ImageF32& img) {
  const ImageF32 sized =
      (img.height() == pred.height() && img.width() == pred.width()) ? img : resize_bilinear(img, pred.height(), pred.width());
  return to_tensor(sized);
}

std::vector<float> flat(const ImageF32& img) { return {img.data().begin(), img.data().end()}; }

}  // namespace

TaskLoss task_loss(const NetworkOutputs& out, const SampleBundle& sample) {
  sample.validate();
  TaskLoss r;
  r.report.task = sample.task;
  auto record = [&](const std::string& name, const Tensor& t) {
    r.report.terms.push_back({name, static_cast<double>(t.item())});
    r.loss = r.loss.defined() ? ad::add(r.loss, t) : t;
  };

  switch (sample.task) {
    case Task::MattingData: {
      const std::pair<const char*, const Tensor*> heads[] = {
          {"os8", &out.alpha_os8}, {"os4", &out.alpha_os4}, {"os1", &out.alpha_os1}};
      for (const auto& [name, pred] : heads) {
        const Tensor gt = target_like(*pred, *sample.alpha);
        record(std::string("l1_") + name, ad::l1_loss(*pred, gt));
        record(std::string("lap_") + name, ad::laplacian_loss(*pred, gt));
      }
      break;
    }
    case Task::SegData: {
      record("seg_bce", ad::bce_loss(out.seg_os8, target_like(out.seg_os8, *sample.seg)));
      record("edge_wce", ad::weighted_ce_edge_loss(out.edge_os1, target_like(out.edge_os1, *sample.edge)));
      break;
    }
    case Task::BgLine: {
      const BinaryMask line_region = loss_region_mask(*sample.distance, kLineLossRadius);
      const BinaryMask mat_region = loss_region_mask(*sample.distance, kMattingLossRadius);
      std::vector<float> line_mask = flat(line_region);
      const std::vector<float> valid = flat(sample.bl->valid);
      for (std::size_t i = 0; i < line_mask.size(); ++i) line_mask[i] *= valid[i];
      bool empty_line = false, empty_mat = false;
      record("line_l1", ad::masked_l1_loss(out.bgline_os1, flat(sample.bl->values), line_mask, &empty_line));
      record("mat_l1", ad::masked_l1_loss(out.alpha_os1, flat(*sample.alpha), flat(mat_region), &empty_mat));
      r.report.empty_line_support = empty_line;
      r.report.empty_matting_support = empty_mat;
      break;
    }
  }
  r.report.total = r.loss.item();
  return r;
}

// ---------------------------------------------------------------------------
// Training

TrainConfig TrainConfig::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  TrainConfig c;
  c.net.base_channels = j.value("base_channels", c.net.base_channels);
  const std::string init = j.value("init", std::string("he_uniform"));
  if (init == "he_uniform") {
    c.net.init = InitScheme::HeUniform;
  } else if (init == "uniform") {
    c.net.init = InitScheme::Uniform;
  } else {
    throw std::invalid_argument("TrainConfig: init must be he_uniform or uniform");
  }
  c.steps = j.value("steps", c.steps);
  c.lr = j.value("lr", c.lr);
  c.seed = j.value("seed", c.seed);
  c.sample_size = j.value("sample_size", c.sample_size);
  c.adaptation_n = j.value("adaptation_n", c.adaptation_n);
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    c.schedule = {s.value("matting", 1), s.value("seg", 1), s.value("bgline", 1)};
  }
  if (c.net.base_channels < 1 || c.steps < 0 || c.lr <= 0.0 || c.sample_size % HeadTopology::max_stride != 0 || c.adaptation_n < 1) {
    throw std::invalid_argument("TrainConfig: invalid values");
  }
  return c;
}

std::string TrainConfig::to_json() const {
  nlohmann::json j = {{"base_channels", net.base_channels},
                      {"init", net.init == InitScheme::HeUniform ? "he_uniform" : "uniform"},
                      {"steps", steps},
                      {"lr", lr},
                      {"seed", seed},
                      {"sample_size", sample_size},
                      {"adaptation_n", adaptation_n},
                      {"schedule", {{"matting", schedule[0]}, {"seg", schedule[1]}, {"bgline", schedule[2]}}}};
  return j.dump(2);
}

std::vector<Task> schedule_cycle(const std::array<int, 3>& weights) {
  std::vector<Task> cycle;
  for (int k = 0; k < 3; ++k) {
    if (weights[k] < 0) throw std::invalid_argument("schedule weights must be >= 0");
    for (int i = 0; i < weights[k]; ++i) cycle.push_back(static_cast<Task>(k));
  }
  if (cycle.empty()) throw std::invalid_argument("schedule has no tasks");
  return cycle;
}

std::uint64_t training_sample_seed(std::uint64_t seed, int step) {
  return derive_seed(seed ^ 0x5A4D504C45ull, static_cast<std::uint64_t>(step));
}

TrainResult train(const TrainConfig& cfg) { return train(cfg, Network(cfg.net, cfg.seed)); }

TrainResult train(const TrainConfig& cfg, Network network) {
  const std::vector<Task> cycle = schedule_cycle(cfg.schedule);
  TrainResult result{std::move(network), {}, false};
  Network& net = result.network;
  ad::AdamState state;
  const ad::AdamConfig adam{cfg.lr};
  SynthOptions so;
  so.size = cfg.sample_size;
  so.adaptation_n = cfg.adaptation_n;
  for (int step = 0; step < cfg.steps; ++step) {
    const Task task = cycle[static_cast<std::size_t>(step) % cycle.size()];
    const SampleBundle sample = synth_sample(task, training_sample_seed(cfg.seed, step), so);
    net.zero_grad();
    const NetworkOutputs out = net.forward(sample.image, sample.guidance);
    const TaskLoss loss = task_loss(out, sample);
    loss.loss.backward();
    for (const Tensor& p : net.parameters()) {
      for (float g : p.grad()) {
        if (!std::isfinite(g)) result.non_finite_grad = true;
      }
    }
    ad::adam_step(net.parameters(), state, adam);
    for (const LossTerm& t : loss.report.terms) result.curve.push_back({step, task, t.name, t.value});
    result.curve.push_back({step, task, "total", loss.report.total});
  }
  return result;
}

std::vector<double> task_totals(const std::vector<CurvePoint>& curve, Task task) {
  std::vector<double> out;
  for (const CurvePoint& p : curve) {
    if (p.task == task && p.term == "total") out.push_back(p.value);
  }
  return out;
}

std::pair<double, double> smoothed_endpoints(const std::vector<double>& values, std::size_t window) {
  if (window == 0 || values.size() < window) throw std::invalid_argument("smoothed_endpoints: not enough values");
  auto mean = [&](std::size_t from) {
    double acc = 0.0;
    for (std::size_t i = from; i < from + window; ++i) acc += values[i];
    return acc / static_cast<double>(window);
  };
  return {mean(0), mean(values.size() - window)};
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out.precision(9);
  out << "step,task,term,value\n";
  for (const CurvePoint& p : curve) out << p.step << ',' << task_name(p.task) << ',' << p.term << ',' << p.value << '\n';
  return out.str();
}

double heldout_line_error(const Network& net, std::uint64_t seed, int count, const SynthOptions& opts) {
  double acc = 0.0;
  for (int i = 0; i < count; ++i) {
    const SampleBundle s = synth_sample(Task::BgLine, derive_seed(seed ^ 0x484F4C44ull, static_cast<std::uint64_t>(i)), opts);
    const NetworkOutputs out = net.forward(s.image, s.guidance);
    acc += masked_l1(to_image(out.bgline_os1), *s.bl, loss_region_mask(*s.distance, kLineLossRadius)).value;
  }
  return acc / count;
}

ImageF32 infer_alpha(const Network& net, const ImageF32& image, const BinaryMask& guidance) {
  return to_image(net.forward(image, guidance).alpha_os1);
}

}  // namespace auxmat
