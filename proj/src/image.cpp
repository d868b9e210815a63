#include "auxmat/image.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace auxmat {

ImageF32::ImageF32(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 1) {
    throw std::invalid_argument("ImageF32: invalid dimensions");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ImageF32::ImageF32(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 0 || width < 0 || channels < 1) {
    throw std::invalid_argument("ImageF32: invalid dimensions");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw std::invalid_argument("ImageF32: data length does not match H*W*C");
  }
}

float ImageF32::clamped(int y, int x, int c) const {
  y = std::clamp(y, 0, height_ - 1);
  x = std::clamp(x, 0, width_ - 1);
  return at(y, x, c);
}

ImageF32 ImageF32::channel(int c) const {
  if (c < 0 || c >= channels_) throw std::out_of_range("ImageF32::channel");
  ImageF32 out(height_, width_, 1);
  for (std::size_t i = 0; i < pixels(); ++i) out.data_[i] = data_[i * channels_ + c];
  return out;
}

bool is_binary(const ImageF32& img) {
  if (img.channels() != 1) return false;
  return std::all_of(img.data().begin(), img.data().end(),
                     [](float v) { return v == 0.0f || v == 1.0f; });
}

void require_binary(const ImageF32& img, const char* what) {
  if (!is_binary(img)) {
    throw std::invalid_argument(std::string(what) + ": expected a single-channel binary mask");
  }
}

void require_same_size(const ImageF32& a, const ImageF32& b, const char* what) {
  if (!a.same_size(b)) {
    throw std::invalid_argument(std::string(what) + ": spatial size mismatch");
  }
}

BinaryMask threshold_mask(const ImageF32& img, float threshold) {
  if (img.channels() != 1) throw std::invalid_argument("threshold_mask: expected one channel");
  BinaryMask out(img.height(), img.width(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? 1.0f : 0.0f;
  return out;
}

ImageF32 to_gray(const ImageF32& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) throw std::invalid_argument("to_gray: expected 1 or 3 channels");
  ImageF32 out(img.height(), img.width(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(y, x) = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
    }
  }
  return out;
}

namespace {

// Square-window rank filter, separated into a row pass and a column pass.
template <typename Pick>
ImageF32 rank_filter(const ImageF32& mask, int k, Pick pick) {
  if (k < 1 || k % 2 == 0) throw std::invalid_argument("morphology: kernel side must be odd and >= 1");
  if (mask.channels() != 1) throw std::invalid_argument("morphology: expected one channel");
  const int r = k / 2;
  const int h = mask.height();
  const int w = mask.width();
  ImageF32 rows(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float v = mask.clamped(y, x - r);
      for (int dx = -r + 1; dx <= r; ++dx) v = pick(v, mask.clamped(y, x + dx));
      rows.at(y, x) = v;
    }
  }
  ImageF32 out(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float v = rows.clamped(y - r, x);
      for (int dy = -r + 1; dy <= r; ++dy) v = pick(v, rows.clamped(y + dy, x));
      out.at(y, x) = v;
    }
  }
  return out;
}

}  // namespace

BinaryMask erode(const BinaryMask& mask, int k) {
  return rank_filter(mask, k, [](float a, float b) { return std::min(a, b); });
}

BinaryMask dilate(const BinaryMask& mask, int k) {
  return rank_filter(mask, k, [](float a, float b) { return std::max(a, b); });
}

ImageF32 gaussian_blur(const ImageF32& img, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_blur: sigma must be > 0");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    kernel[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + r];
  }
  for (double& v : kernel) v /= total;

  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  ImageF32 rows(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += kernel[i + r] * img.clamped(y, x + i, c);
        rows.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  ImageF32 out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += kernel[i + r] * rows.clamped(y + i, x, c);
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

ImageF32 add_gaussian_noise(const ImageF32& img, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
  ImageF32 out = img;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (float& v : out.data()) {
    v = static_cast<float>(std::clamp(static_cast<double>(v) + noise(rng), 0.0, 1.0));
  }
  return out;
}

ImageF32 resize_bilinear(const ImageF32& img, int new_height, int new_width) {
  if (new_height < 1 || new_width < 1) throw std::invalid_argument("resize_bilinear: target size must be >= 1");
  if (img.empty()) throw std::invalid_argument("resize_bilinear: empty input");
  const int h = img.height();
  const int w = img.width();
  const int ch = img.channels();
  const double sy = static_cast<double>(h) / new_height;
  const double sx = static_cast<double>(w) / new_width;
  ImageF32 out(new_height, new_width, ch);
  for (int y = 0; y < new_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - y0;
    for (int x = 0; x < new_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - x0;
      for (int c = 0; c < ch; ++c) {
        const double top = img.at(y0, x0, c) + tx * (img.at(y0, x1, c) - img.at(y0, x0, c));
        const double bot = img.at(y1, x0, c) + tx * (img.at(y1, x1, c) - img.at(y1, x0, c));
        out.at(y, x, c) = static_cast<float>(top + ty * (bot - top));
      }
    }
  }
  return out;
}

}  // namespace auxmat
