#include "auxmat/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

namespace auxmat {

namespace fs = std::filesystem;

void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& writer) {
  std::random_device rd;
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    try {
      writer(out);
    } catch (...) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into place: " + path.string());
  }
}

std::uint8_t quantize_u8(float v) {
  const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5));
}

ImageF32 read_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  const int channels = color ? 3 : 1;
  ImageF32 out(static_cast<int>(image.height), static_cast<int>(image.width), channels);
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = buffer[i] / 255.0f;
  return out;
}

void write_png(const fs::path& path, const ImageF32& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw std::invalid_argument("write_png: only 1- or 3-channel images");
  }
  std::vector<png_byte> buffer(img.size());
  auto src = img.data();
  std::transform(src.begin(), src.end(), buffer.begin(), quantize_u8);

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot size PNG for " + path.string());
  }
  std::vector<png_byte> encoded(size);
  if (!png_image_write_to_memory(&image, encoded.data(), &size, 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot encode PNG for " + path.string() + ": " + image.message);
  }
  write_atomically(path, [&](std::ostream& out) {
    out.write(reinterpret_cast<const char*>(encoded.data()), static_cast<std::streamsize>(size));
  });
}

namespace {

constexpr char kFieldMagic[4] = {'F', 'L', 'D', '1'};

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_field(const ImageF32& img) {
  std::string bytes(kFieldMagic, 4);
  bytes.reserve(16 + 4 * img.size());
  put_u32(bytes, static_cast<std::uint32_t>(img.height()));
  put_u32(bytes, static_cast<std::uint32_t>(img.width()));
  put_u32(bytes, static_cast<std::uint32_t>(img.channels()));
  for (float v : img.data()) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
  return bytes;
}

ImageF32 decode_field(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kFieldMagic, 4) != 0) {
    throw IoError("not an FLD1 field");
  }
  const std::uint32_t h = get_u32(bytes, 4);
  const std::uint32_t w = get_u32(bytes, 8);
  const std::uint32_t c = get_u32(bytes, 12);
  const std::size_t count = static_cast<std::size_t>(h) * w * c;
  if (c == 0 || bytes.size() != 16 + 4 * count) throw IoError("FLD1 payload size mismatch");
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
  return ImageF32(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), std::move(data));
}

ImageF32 read_field(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_field(ss.str());
}

void write_field(const fs::path& path, const ImageF32& img) {
  const std::string bytes = encode_field(img);
  write_atomically(path, [&](std::ostream& out) { out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); });
}

}  // namespace auxmat
