#pragma once

#include <cstdint>

#include "auxmat/image.hpp"

namespace auxmat {

struct CompositeSample {
  ImageF32 image;       // I, 3ch
  ImageF32 foreground;  // F, 3ch
  ImageF32 background;  // B, 3ch
  ImageF32 alpha;       // A, 1ch in [0,1]
  BinaryMask guidance;
};

/// I = A*F + (1-A)*B per pixel and channel.
ImageF32 composite(const ImageF32& fg, const ImageF32& bg, const ImageF32& alpha);

/// Coarse guidance from a matte: erode(A >= threshold, erode_k).
BinaryMask make_guidance(const ImageF32& alpha, float threshold = 0.95f, int erode_k = 21);

/// Training-time corruption of a guidance mask.
///
/// Step 1 always runs: dilate with probability `dilate_prob`, otherwise erode,
/// using an odd kernel side drawn uniformly from [kernel_min, kernel_max].
/// Step 2 needs a distance field: with probability `line_prob`, the band
/// D <= w/2 is set to 1 for a width w drawn uniformly from
/// [width_min, width_max]. All four draws happen on every call, in that
/// order, so the random stream does not depend on which branches fire.
struct PerturbPolicy {
  double dilate_prob = 0.5;
  int kernel_min = 3;
  int kernel_max = 15;
  double line_prob = 0.2;
  int width_min = 2;
  int width_max = 8;
};

BinaryMask perturb_guidance(const BinaryMask& mask, const ImageF32* distance, std::uint64_t seed,
                            const PerturbPolicy& policy = {});

/// 1 where the (2r+1)^2 neighbourhood of `seg` holds both a 0 and a 1.
BinaryMask edge_from_mask(const BinaryMask& seg, int radius = 2);

}  // namespace auxmat
