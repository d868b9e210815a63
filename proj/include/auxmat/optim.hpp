#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "auxmat/autodiff.hpp"

namespace auxmat::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

/// One bias-corrected Adam update of every parameter from its accumulated grad.
template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, AdamState& state, const AdamConfig& cfg = {}) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state/parameter count mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k].mutable_value();
    auto grad = params[k].grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      value[i] = static_cast<T>(value[i] - cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps));
    }
  }
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

using ScalarFn = std::function<Tensor64(const std::vector<Tensor64>&)>;
/// Optional filter: (input index, element index, current inputs) -> check this coordinate?
using CoordFilter = std::function<bool(std::size_t, std::size_t, const std::vector<Tensor64>&)>;

/// Compares reverse-mode gradients of `fn` against central differences,
/// coordinate by coordinate, at 64-bit precision.
/// rel = |ad - fd| / max(1, |ad|, |fd|).
GradCheckResult finite_difference_check(const ScalarFn& fn, const std::vector<Tensor64>& inputs, double eps = 1e-5,
                                        const CoordFilter& include = {});

using NamedTensor = std::pair<std::string, Tensor>;

// CKPT: "CKPT", u32 LE count; per entry u16 LE name length, UTF-8 name,
// u8 rank, rank x u32 LE dims, f32 LE data.
std::string encode_checkpoint(const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace auxmat::ad
