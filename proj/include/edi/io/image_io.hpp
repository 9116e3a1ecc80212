#pragma once

// 8-bit grayscale image files. PNG goes through libpng's simplified API,
// PGM (P2/P5) is handled here.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "edi/error.hpp"
#include "edi/grid.hpp"

namespace edi::io {

using Gray8 = Grid<std::uint8_t>;

// round(clamp(v) * 255), halves rounded up.
inline std::uint8_t to_byte(double v) {
  const double scaled = std::clamp(v, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::min(255.0, std::floor(scaled + 0.5)));
}

inline Gray8 to_gray8(const Image& img) {
  Gray8 out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = to_byte(img[i]);
  return out;
}

inline Image from_gray8(const Gray8& img) {
  Image out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] / 255.0;
  return out;
}

inline std::vector<unsigned char> encode_png(const Gray8& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels().data(), 0, nullptr)) {
    throw IoError(std::string("png encode failed: ") + image.message);
  }
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels().data(), 0, nullptr)) {
    throw IoError(std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

inline std::vector<unsigned char> encode_png(const Image& img) { return encode_png(to_gray8(img)); }

inline Gray8 decode_png(const unsigned char* data, std::size_t size, const std::string& name) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, data, size)) {
    throw IoError("cannot read PNG " + name + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  Gray8 out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.pixels().data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + name + ": " + image.message);
  }
  return out;
}

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

inline Gray8 decode_pgm(const std::vector<unsigned char>& bytes, const std::string& name) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    std::string tok;
    while (pos < bytes.size()) {
      const char ch = static_cast<char>(bytes[pos]);
      if (ch == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        ++pos;
      } else {
        tok += ch;
        ++pos;
      }
    }
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P2") throw IoError(name + " is not a P2/P5 PGM file");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError("malformed PGM header in " + name);
  }
  if (width <= 0 || height <= 0 || maxval != 255) throw IoError(name + ": only 8-bit PGM (maxval 255) is supported");
  Gray8 out(width, height);
  if (magic == "P5") {
    ++pos;  // single whitespace after maxval
    if (bytes.size() < pos + out.size()) throw IoError(name + ": truncated PGM data");
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
              bytes.begin() + static_cast<std::ptrdiff_t>(pos + out.size()), out.pixels().begin());
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const std::string tok = next_token();
      if (tok.empty()) throw IoError(name + ": truncated PGM data");
      const int v = std::stoi(tok);
      if (v < 0 || v > 255) throw IoError(name + ": PGM value out of range");
      out[i] = static_cast<std::uint8_t>(v);
    }
  }
  return out;
}

inline std::string lower_extension(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace detail

inline Gray8 read_gray8(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("image file not found: " + path);
  const auto bytes = detail::read_file(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes.data(), bytes.size(), path);
  return detail::decode_pgm(bytes, path);
}

// Pixel values scaled to [0, 1].
inline Image read_image(const std::string& path) { return from_gray8(read_gray8(path)); }

inline void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

inline std::vector<unsigned char> encode_pgm(const Gray8& img) {
  std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels().begin(), img.pixels().end());
  return out;
}

// Format chosen by extension: .pgm writes binary PGM, anything else PNG.
inline void write_image(const std::string& path, const Image& img) {
  const Gray8 g = to_gray8(img);
  write_bytes(path, detail::lower_extension(path) == ".pgm" ? encode_pgm(g) : encode_png(g));
}

}  // namespace edi::io
