#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "auxmat/ad_ops.hpp"
#include "auxmat/image.hpp"
#include "auxmat/linedet.hpp"
#include "auxmat/optim.hpp"
#include "auxmat/pseudogt.hpp"

namespace auxmat {

enum class Task { MattingData = 0, SegData = 1, BgLine = 2 };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

/// Output strides of every head. The topology is fixed; only width varies.
struct HeadTopology {
  static constexpr std::array<int, 3> matting = {8, 4, 1};
  static constexpr int segmentation = 8;
  static constexpr int edge = 1;
  static constexpr int background_line = 1;
  /// IGDR reads the OS32 encoder feature and acts on the OS8 decoder feature.
  static constexpr int igdr_context = 32;
  static constexpr int igdr_feature = 8;
  static constexpr int max_stride = 32;
};

/// Uniform: weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
/// HeUniform: weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases, zero offset conv.
enum class InitScheme { Uniform, HeUniform };

struct NetworkConfig {
  int base_channels = 8;
  /// RGB image plus the guidance mask.
  int in_channels = 4;
  InitScheme init = InitScheme::HeUniform;
};

struct IgdrProducts {
  ad::Tensor se;       // warped matting representation
  ad::Tensor in;       // Ma - Se
  ad::Tensor offsets;  // (2, H, W): dx, dy
};

struct NetworkOutputs {
  ad::Tensor alpha_os8, alpha_os4, alpha_os1;  // sigmoid
  ad::Tensor seg_os8;                          // logits
  ad::Tensor edge_os1;                         // logits
  ad::Tensor bgline_os1;                       // sigmoid
  ad::Tensor ma;                               // OS8 matting representation
  IgdrProducts igdr;
};

/// Test hooks for the wiring probes around the Ma / Se split.
struct ForwardProbe {
  bool zero_se = false;
  bool zero_ma_after_split = false;
};

/// Offsets = conv3x3(concat(Ma, upsample(context))); Se = warp(Ma, offsets); IN = Ma - Se.
IgdrProducts igdr_forward(const ad::Tensor& ma, const ad::Tensor& context_os32, const ad::Tensor& offset_weight,
                          const ad::Tensor& offset_bias);

class Network {
 public:
  Network(const NetworkConfig& cfg, std::uint64_t seed);
  /// Rebuilds from named parameters; the width is read from "enc0.weight".
  static Network from_checkpoint(const std::vector<ad::NamedTensor>& entries);

  NetworkOutputs forward(const ImageF32& image, const BinaryMask& guidance, const ForwardProbe& probe = {}) const;

  const NetworkConfig& config() const { return cfg_; }
  std::vector<ad::Tensor>& parameters() { return params_; }
  const std::vector<ad::Tensor>& parameters() const { return params_; }
  std::vector<ad::NamedTensor> named_parameters() const;
  ad::Tensor& parameter(const std::string& name);
  std::size_t parameter_count() const;
  /// FNV-1a over the raw parameter bits.
  std::uint64_t checksum() const;
  void zero_grad();

 private:
  void add_conv(const std::string& name, int cin, int cout, std::uint64_t seed);
  const ad::Tensor& w(const std::string& layer) const;
  const ad::Tensor& b(const std::string& layer) const;
  ad::Tensor conv(const std::string& layer, const ad::Tensor& x, int stride = 1) const;

  NetworkConfig cfg_;
  std::vector<std::string> names_;
  std::vector<ad::Tensor> params_;
};

/// One training sample. Which ground truths are present depends on the task:
/// MattingData: alpha. SegData: seg + edge. BgLine: alpha + bl + distance.
struct SampleBundle {
  Task task = Task::MattingData;
  ImageF32 image;  // 3ch
  BinaryMask guidance;
  std::optional<ImageF32> alpha;
  std::optional<BinaryMask> seg;
  std::optional<BinaryMask> edge;
  std::optional<SupervisionMap> bl;
  std::optional<DistanceField> distance;

  /// Throws std::invalid_argument when a required field is missing or malformed.
  void validate() const;
};

struct SynthOptions {
  int size = 64;
  /// Homographies per background-line sample.
  int adaptation_n = 5;
};

SampleBundle synth_sample(Task task, std::uint64_t seed, const SynthOptions& opts = {});

struct LossTerm {
  std::string name;
  double value = 0.0;
};

struct LossReport {
  Task task = Task::MattingData;
  double total = 0.0;
  std::vector<LossTerm> terms;
  bool empty_line_support = false;
  bool empty_matting_support = false;
};

struct TaskLoss {
  ad::Tensor loss;
  LossReport report;
};

/// MattingData: sum over the three matting heads of L1 + Laplacian against
///   the matte resized to each head.
/// SegData: BCE(seg_os8, seg at OS8) + class-balanced CE(edge_os1, edge).
/// BgLine: masked L1 of the line head on D <= 13 plus masked L1 of alpha_os1
///   on D <= 3.
TaskLoss task_loss(const NetworkOutputs& out, const SampleBundle& sample);

struct TrainConfig {
  NetworkConfig net{};
  int steps = 300;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  /// Samples per task in each round-robin cycle, in MattingData, SegData, BgLine order.
  std::array<int, 3> schedule{1, 1, 1};
  int sample_size = 64;
  int adaptation_n = 5;

  static TrainConfig from_json(const std::string& text);
  std::string to_json() const;
};

struct CurvePoint {
  int step = 0;
  Task task = Task::MattingData;
  std::string term;
  double value = 0.0;
};

struct TrainResult {
  Network network;
  std::vector<CurvePoint> curve;
  /// True if any parameter gradient was NaN/Inf at any step.
  bool non_finite_grad = false;
};

/// Task order for one schedule cycle, e.g. {1,1,1} -> M, S, B.
std::vector<Task> schedule_cycle(const std::array<int, 3>& weights);

/// Seed of the sample drawn at a training step.
std::uint64_t training_sample_seed(std::uint64_t seed, int step);

TrainResult train(const TrainConfig& cfg);
/// Continues training an existing network.
TrainResult train(const TrainConfig& cfg, Network network);

/// Per-task "total" values, in step order.
std::vector<double> task_totals(const std::vector<CurvePoint>& curve, Task task);
/// Mean of consecutive windows; returns (first window mean, last window mean).
std::pair<double, double> smoothed_endpoints(const std::vector<double>& values, std::size_t window = 20);

std::string curve_to_csv(const std::vector<CurvePoint>& curve);

/// Mean background-line masked L1 (D <= 13) over held-out BgLine samples.
double heldout_line_error(const Network& net, std::uint64_t seed, int count, const SynthOptions& opts = {});

/// Alpha prediction of the OS1 head as a 1-channel image.
ImageF32 infer_alpha(const Network& net, const ImageF32& image, const BinaryMask& guidance);

ImageF32 to_image(const ad::Tensor& t);
ad::Tensor to_tensor(const ImageF32& img);

}  // namespace auxmat
