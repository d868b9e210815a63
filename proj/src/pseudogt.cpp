#include "auxmat/pseudogt.hpp"

#include <cmath>
#include <stdexcept>

namespace auxmat {

ImageF32 SupervisionMap::pack() const {
  require_same_size(values, valid, "SupervisionMap::pack");
  ImageF32 out(values.height(), values.width(), 2);
  for (std::size_t i = 0; i < values.pixels(); ++i) {
    out.data()[2 * i] = values.data()[i];
    out.data()[2 * i + 1] = valid.data()[i];
  }
  return out;
}

SupervisionMap SupervisionMap::unpack(const ImageF32& packed) {
  if (packed.channels() != 2) throw std::invalid_argument("SupervisionMap::unpack: expected 2 channels");
  SupervisionMap m{packed.channel(0), packed.channel(1)};
  require_binary(m.valid, "SupervisionMap::unpack");
  return m;
}

SupervisionMap SupervisionMap::dense(const ImageF32& values) {
  return {values, BinaryMask(values.height(), values.width(), 1, 1.0f)};
}

SupervisionMap background_line_gt(const ImageF32& line_act, const ImageF32& alpha) {
  if (line_act.channels() != 1 || alpha.channels() != 1) {
    throw std::invalid_argument("background_line_gt: expected single-channel inputs");
  }
  require_same_size(line_act, alpha, "background_line_gt");
  SupervisionMap out{ImageF32(alpha.height(), alpha.width(), 1), BinaryMask(alpha.height(), alpha.width(), 1)};
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const float a = alpha.data()[i];
    if (a >= 1.0f - kOpaqueTolerance) {
      out.values.data()[i] = 0.0f;
      out.valid.data()[i] = 1.0f;
    } else if (a >= kIgnoreLow) {
      out.values.data()[i] = 0.0f;
      out.valid.data()[i] = 0.0f;
    } else {
      out.values.data()[i] = line_act.data()[i];
      out.valid.data()[i] = 1.0f;
    }
  }
  return out;
}

BinaryMask loss_region_mask(const DistanceField& d, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("loss_region_mask: threshold must be > 0");
  if (d.channels() != 1) throw std::invalid_argument("loss_region_mask: expected one channel");
  BinaryMask out(d.height(), d.width(), 1);
  for (std::size_t i = 0; i < d.size(); ++i) out.data()[i] = d.data()[i] <= threshold ? 1.0f : 0.0f;
  return out;
}

MaskedL1 masked_l1(const ImageF32& pred, const SupervisionMap& target, const BinaryMask& region) {
  if (pred.channels() != 1) throw std::invalid_argument("masked_l1: expected single-channel prediction");
  require_same_size(pred, target.values, "masked_l1");
  require_same_size(pred, target.valid, "masked_l1");
  require_same_size(pred, region, "masked_l1");
  MaskedL1 out;
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (region.data()[i] == 0.0f || target.valid.data()[i] == 0.0f) continue;
    acc += std::abs(static_cast<double>(pred.data()[i]) - target.values.data()[i]);
    ++out.support;
  }
  if (out.support > 0) out.value = acc / static_cast<double>(out.support);
  return out;
}

}  // namespace auxmat
