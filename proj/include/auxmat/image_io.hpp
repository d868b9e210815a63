#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "auxmat/image.hpp"

namespace auxmat {

/// File-system or format failure. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes through a sibling temporary file and renames it into place on
/// success, so a failed write never leaves a partial `path` behind.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer);

// 8-bit PNG, gray (C=1) or RGB (C=3). Samples map to bytes by round-half-up
// of v*255 after clamping to [0,1]; reading maps byte b to b/255.
ImageF32 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageF32& img);
std::uint8_t quantize_u8(float v);

// FLD1: "FLD1", then H, W, C as u32 LE, then H*W*C f32 LE, row-major channel-last.
ImageF32 read_field(const std::filesystem::path& path);
void write_field(const std::filesystem::path& path, const ImageF32& img);
ImageF32 decode_field(const std::string& bytes);
std::string encode_field(const ImageF32& img);

}  // namespace auxmat
