#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace auxmat {

/// H x W x C float raster, row-major, channel-last.
///
/// Images, alpha mattes, masks and activation maps all share this carrier.
/// Values loaded from 8-bit files live in [0,1].
class ImageF32 {
 public:
  ImageF32() = default;
  ImageF32(int height, int width, int channels, float fill = 0.0f);
  ImageF32(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  /// Replicate-border read.
  float clamped(int y, int x, int c = 0) const;

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }

  ImageF32 channel(int c) const;
  bool same_shape(const ImageF32& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool same_size(const ImageF32& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageF32&, const ImageF32&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Single-channel ImageF32 whose samples are exactly 0 or 1.
using BinaryMask = ImageF32;

bool is_binary(const ImageF32& img);
void require_binary(const ImageF32& img, const char* what);
void require_same_size(const ImageF32& a, const ImageF32& b, const char* what);

/// Binarize: 1 where img >= threshold.
BinaryMask threshold_mask(const ImageF32& img, float threshold);

/// Luma of an RGB image (ITU-R 601 weights); single channel passes through.
ImageF32 to_gray(const ImageF32& img);

// Morphology with a k x k square window, replicate border. k must be odd.
BinaryMask erode(const BinaryMask& mask, int k);
BinaryMask dilate(const BinaryMask& mask, int k);

/// Separable truncated Gaussian, radius ceil(3 sigma), replicate border.
ImageF32 gaussian_blur(const ImageF32& img, double sigma);

/// i.i.d. N(0, sigma^2) per sample, clamped to [0,1].
ImageF32 add_gaussian_noise(const ImageF32& img, double sigma, std::uint64_t seed);

/// Half-pixel-centred bilinear resampling (align_corners = false).
ImageF32 resize_bilinear(const ImageF32& img, int new_height, int new_width);

}  // namespace auxmat
