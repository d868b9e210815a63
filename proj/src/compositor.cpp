#include "auxmat/compositor.hpp"

#include <random>
#include <stdexcept>

namespace auxmat {

ImageF32 composite(const ImageF32& fg, const ImageF32& bg, const ImageF32& alpha) {
  if (!fg.same_shape(bg)) throw std::invalid_argument("composite: foreground/background shape mismatch");
  if (alpha.channels() != 1) throw std::invalid_argument("composite: alpha must be single-channel");
  require_same_size(fg, alpha, "composite");
  ImageF32 out(fg.height(), fg.width(), fg.channels());
  for (int y = 0; y < fg.height(); ++y) {
    for (int x = 0; x < fg.width(); ++x) {
      const float a = alpha.at(y, x);
      for (int c = 0; c < fg.channels(); ++c) {
        out.at(y, x, c) = a * fg.at(y, x, c) + (1.0f - a) * bg.at(y, x, c);
      }
    }
  }
  return out;
}

BinaryMask make_guidance(const ImageF32& alpha, float threshold, int erode_k) {
  return erode(threshold_mask(alpha, threshold), erode_k);
}

BinaryMask perturb_guidance(const BinaryMask& mask, const ImageF32* distance, std::uint64_t seed,
                            const PerturbPolicy& policy) {
  require_binary(mask, "perturb_guidance");
  if (distance != nullptr) require_same_size(mask, *distance, "perturb_guidance");
  if (policy.kernel_min < 1 || policy.kernel_min % 2 == 0 || policy.kernel_max < policy.kernel_min ||
      policy.kernel_max % 2 == 0 || policy.width_min < 0 || policy.width_max < policy.width_min) {
    throw std::invalid_argument("perturb_guidance: invalid policy ranges");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> half_kernel(policy.kernel_min / 2, policy.kernel_max / 2);
  std::uniform_int_distribution<int> width(policy.width_min, policy.width_max);
  const bool do_dilate = unit(rng) < policy.dilate_prob;
  const int k = 2 * half_kernel(rng) + 1;
  const bool do_line = unit(rng) < policy.line_prob;
  const int w = width(rng);

  BinaryMask out = do_dilate ? dilate(mask, k) : erode(mask, k);
  if (distance != nullptr && do_line) {
    const float half = 0.5f * static_cast<float>(w);
    auto d = distance->data();
    auto m = out.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (d[i] <= half) m[i] = 1.0f;
    }
  }
  return out;
}

BinaryMask edge_from_mask(const BinaryMask& seg, int radius) {
  require_binary(seg, "edge_from_mask");
  if (radius < 0) throw std::invalid_argument("edge_from_mask: radius must be >= 0");
  const int k = 2 * radius + 1;
  const BinaryMask hi = dilate(seg, k);
  const BinaryMask lo = erode(seg, k);
  BinaryMask out(seg.height(), seg.width(), 1);
  auto o = out.data();
  auto a = hi.data();
  auto b = lo.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (a[i] == 1.0f && b[i] == 0.0f) ? 1.0f : 0.0f;
  return out;
}

}  // namespace auxmat
