#include "auxmat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "auxmat/ad_loss.hpp"
#include "auxmat/ad_ops.hpp"
#include "auxmat/optim.hpp"
#include "auxmat/random.hpp"

namespace auxmat {

namespace {

using ad::Tensor64;
using T64 = std::vector<Tensor64>;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::vector<double> values(std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng_);
    return v;
  }
  Tensor64 tensor(const ad::Shape& shape, double lo = -1.0, double hi = 1.0) {
    return Tensor64::constant(shape, values(ad::numel(shape), lo, hi));
  }
  // Values bounded away from zero, for ops with a kink at 0.
  Tensor64 off_zero(const ad::Shape& shape) {
    std::vector<double> v = values(ad::numel(shape), 0.05, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (double& x : v) x = sign(rng_) ? x : -x;
    return Tensor64::constant(shape, std::move(v));
  }

 private:
  std::mt19937_64 rng_;
};

struct Case {
  ad::ScalarFn fn;
  T64 inputs;
  ad::CoordFilter filter;
};

Case make_case(const std::string& op, Gen& g) {
  // Random projection to a scalar so no gradient cancels by symmetry.
  const std::vector<double> wts = g.values(4 * 8 * 8 * 4);
  auto proj = [wts](const Tensor64& t) {
    return ad::weighted_sum(t, std::vector<double>(wts.begin(), wts.begin() + static_cast<long>(t.numel())));
  };

  if (op == "conv2d") {
    return {[proj](const T64& in) { return proj(ad::conv2d(in[0], in[1], in[2], 2, 1)); },
            {g.tensor({2, 7, 6}), g.tensor({3, 2, 3, 3}), g.tensor({3})},
            {}};
  }
  if (op == "relu") {
    return {[proj](const T64& in) { return proj(ad::relu(in[0])); }, {g.off_zero({2, 4, 5})}, {}};
  }
  if (op == "sigmoid") {
    return {[proj](const T64& in) { return proj(ad::sigmoid(in[0])); }, {g.tensor({2, 4, 5}, -3, 3)}, {}};
  }
  if (op == "add_sub_mul") {
    return {[proj](const T64& in) { return proj(ad::mul(ad::sub(in[0], in[1]), ad::add(in[0], in[1]))); },
            {g.tensor({2, 3, 4}), g.tensor({2, 3, 4})},
            {}};
  }
  if (op == "concat_channels") {
    return {[proj](const T64& in) { return proj(ad::concat_channels(in[0], in[1])); },
            {g.tensor({2, 3, 4}), g.tensor({1, 3, 4})},
            {}};
  }
  if (op == "slice_channels") {
    return {[proj](const T64& in) { return proj(ad::slice_channels(in[0], 1, 3)); }, {g.tensor({4, 3, 3})}, {}};
  }
  if (op == "upsample_bilinear_2x") {
    return {[proj](const T64& in) { return proj(ad::upsample_bilinear_2x(in[0])); }, {g.tensor({2, 3, 4})}, {}};
  }
  if (op == "upsample_bilinear") {
    return {[proj](const T64& in) { return proj(ad::upsample_bilinear(in[0], 7, 9)); }, {g.tensor({2, 2, 3})}, {}};
  }
  if (op == "downsample_avg_2x") {
    return {[proj](const T64& in) { return proj(ad::downsample_avg_2x(in[0])); }, {g.tensor({2, 6, 4})}, {}};
  }
  if (op == "binomial_blur5") {
    return {[proj](const T64& in) { return proj(ad::binomial_blur5(in[0])); }, {g.tensor({1, 7, 6})}, {}};
  }
  if (op == "subsample_2x") {
    return {[proj](const T64& in) { return proj(ad::subsample_2x(in[0])); }, {g.tensor({2, 5, 6})}, {}};
  }
  if (op == "warp_with_offsets") {
    const int h = 6, w = 5;
    // Offset coordinates on the integer lattice sit on a kink of the bilinear weights.
    auto filter = [h, w](std::size_t input, std::size_t i, const T64& in) {
      if (input != 1) return true;
      const std::size_t plane = static_cast<std::size_t>(h) * w;
      const std::size_t p = i % plane;
      const double base = i < plane ? static_cast<double>(p % w) : static_cast<double>(p / w);
      const double coord = base + in[1].value()[i];
      return std::abs(coord - std::round(coord)) > 1e-3;
    };
    return {[proj](const T64& in) { return proj(ad::warp_with_offsets(in[0], in[1])); },
            {g.tensor({3, h, w}), g.tensor({2, h, w}, -2.0, 2.0)},
            filter};
  }
  if (op == "l1_loss") {
    return {[](const T64& in) { return ad::l1_loss(ad::add(in[0], in[1]), in[1]); },
            {g.off_zero({1, 4, 5}), g.tensor({1, 4, 5})},
            [](std::size_t input, std::size_t, const T64&) { return input == 0; }};
  }
  if (op == "masked_l1_loss") {
    const std::vector<double> target = g.values(20, 0.0, 1.0);
    std::vector<double> mask = g.values(20, 0.0, 1.0);
    for (double& m : mask) m = m > 0.4 ? 1.0 : 0.0;
    std::vector<double> pred = target;
    const Tensor64 gap = g.off_zero({1, 4, 5});
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += 0.5 * gap.value()[i];
    return {[target, mask](const T64& in) { return ad::masked_l1_loss(in[0], target, mask); },
            {Tensor64::constant({1, 4, 5}, std::move(pred))},
            {}};
  }
  if (op == "bce_loss") {
    return {[](const T64& in) { return ad::bce_loss(in[0], in[1]); },
            {g.tensor({1, 4, 5}, -4, 4), g.tensor({1, 4, 5}, 0, 1)},
            [](std::size_t input, std::size_t, const T64&) { return input == 0; }};
  }
  if (op == "weighted_ce_edge_loss") {
    std::vector<double> t = g.values(20, 0.0, 1.0);
    for (double& x : t) x = x > 0.7 ? 1.0 : 0.0;
    t[0] = 1.0;
    const Tensor64 target = Tensor64::constant({1, 4, 5}, t);
    return {[target](const T64& in) { return ad::weighted_ce_edge_loss(in[0], target); },
            {g.tensor({1, 4, 5}, -4, 4)},
            {}};
  }
  if (op == "laplacian_loss") {
    return {[](const T64& in) { return ad::laplacian_loss(in[0], in[1], 5); },
            {g.tensor({1, 16, 16}, 0, 1), g.tensor({1, 16, 16}, 0, 1)},
            [](std::size_t input, std::size_t, const T64&) { return input == 0; }};
  }
  throw std::invalid_argument("unknown gradcheck op '" + op + "'");
}

double tolerance_for(const std::string& op) {
  return (op == "warp_with_offsets" || op == "laplacian_loss") ? 1e-3 : 1e-4;
}

}  // namespace

const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops = {
      "conv2d",         "relu",           "sigmoid",           "add_sub_mul",       "concat_channels",
      "slice_channels", "upsample_bilinear_2x", "upsample_bilinear", "downsample_avg_2x", "binomial_blur5",
      "subsample_2x",   "warp_with_offsets",    "l1_loss",           "masked_l1_loss",    "bce_loss",
      "weighted_ce_edge_loss", "laplacian_loss"};
  return ops;
}

std::vector<GradCheckReport> run_gradchecks(const std::string& op, const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> selected;
  if (op == "all") {
    selected = gradcheck_ops();
  } else if (std::find(gradcheck_ops().begin(), gradcheck_ops().end(), op) != gradcheck_ops().end()) {
    selected = {op};
  } else {
    throw std::invalid_argument("unknown gradcheck op '" + op + "'");
  }
  std::vector<GradCheckReport> reports;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    GradCheckReport r{selected[k], 0.0, tolerance_for(selected[k]), 0};
    for (std::uint64_t seed : seeds) {
      const auto pos = std::find(gradcheck_ops().begin(), gradcheck_ops().end(), selected[k]) - gradcheck_ops().begin();
      Gen g(derive_seed(seed, static_cast<std::uint64_t>(pos)));
      const Case c = make_case(selected[k], g);
      const ad::GradCheckResult res = ad::finite_difference_check(c.fn, c.inputs, 1e-5, c.filter);
      r.max_rel_error = std::max(r.max_rel_error, res.max_rel_error);
      r.checked += res.checked;
    }
    reports.push_back(r);
  }
  return reports;
}

}  // namespace auxmat
