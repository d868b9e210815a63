#pragma once

#include "auxmat/image.hpp"
#include "auxmat/linedet.hpp"

namespace auxmat {

/// Regression target with an ignore mask. Pixels with valid == 0 never
/// contribute to a loss.
struct SupervisionMap {
  ImageF32 values;
  BinaryMask valid;

  /// Packs into a 2-channel raster (values, valid) for FLD1 persistence.
  ImageF32 pack() const;
  static SupervisionMap unpack(const ImageF32& packed);
  /// Every pixel supervised.
  static SupervisionMap dense(const ImageF32& values);
};

inline constexpr float kIgnoreLow = 0.8f;
inline constexpr float kOpaqueTolerance = 1e-6f;
inline constexpr double kLineLossRadius = 13.0;
inline constexpr double kMattingLossRadius = 3.0;

/// Background-line target from the line activation and the matte:
///   A < 0.8          -> Pl, supervised
///   0.8 <= A < 1     -> ignored
///   A == 1 (+-1e-6)  -> 0, supervised
SupervisionMap background_line_gt(const ImageF32& line_act, const ImageF32& alpha);

/// 1 where D <= threshold.
BinaryMask loss_region_mask(const DistanceField& d, double threshold);

struct MaskedL1 {
  double value = 0.0;
  std::size_t support = 0;
  bool empty_support() const { return support == 0; }
};

/// Mean |pred - target| over pixels with region == 1 and valid == 1; 0 with
/// an empty-support flag when no pixel qualifies.
MaskedL1 masked_l1(const ImageF32& pred, const SupervisionMap& target, const BinaryMask& region);

}  // namespace auxmat
