// SPDX-License-Identifier: Apache-2.0
#include "dynavsr/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>

namespace dynavsr::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;

  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) throw std::runtime_error("libpng allocation failed");
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;

  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
    if (!png || !info) throw std::runtime_error("libpng allocation failed");
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

// Reads the image with all format variants normalized to 8-bit gray or RGB.
Image<double> decode(const std::string& path, PngInfo* info_only) {
  FilePtr f = open_file(path, "rb");
  PngReader r;
  if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error("failed to decode " + path);
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);

  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (bit_depth == 16) png_set_strip_16(r.png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);

  const int channels = png_get_channels(r.png, r.info);
  if (channels != 1 && channels != 3)
    throw std::runtime_error(path + ": unsupported channel count " + std::to_string(channels));

  if (info_only) {
    *info_only = {static_cast<int>(h), static_cast<int>(w), channels};
    return {};
  }

  std::vector<png_byte> row(static_cast<size_t>(w) * channels);
  Image<double> im(channels, static_cast<int>(h), static_cast<int>(w));
  for (png_uint_32 i = 0; i < h; ++i) {
    png_read_row(r.png, row.data(), nullptr);
    for (png_uint_32 j = 0; j < w; ++j)
      for (int c = 0; c < channels; ++c) im.ch[c](i, j) = row[j * channels + c] / 255.0;
  }
  png_read_end(r.png, nullptr);
  return im;
}

}  // namespace

PngInfo probe_png(const std::string& path) {
  PngInfo info;
  decode(path, &info);
  return info;
}

Image<double> read_png(const std::string& path) { return decode(path, nullptr); }

void write_png(const std::string& path, const Image<double>& im) {
  const int channels = im.channels();
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("write_png: need 1 or 3 channels, got " + std::to_string(channels));
  const int h = im.height(), w = im.width();
  if (h < 1 || w < 1) throw std::invalid_argument("write_png: empty image");

  FilePtr f = open_file(path, "wb");
  PngWriter wr;
  if (setjmp(png_jmpbuf(wr.png))) throw std::runtime_error("failed to encode " + path);
  png_init_io(wr.png, f.get());
  png_set_IHDR(wr.png, wr.info, w, h, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);

  std::vector<png_byte> row(static_cast<size_t>(w) * channels);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < channels; ++c) {
        const double v = std::min(1.0, std::max(0.0, im.ch[c](i, j)));
        row[j * channels + c] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(wr.png, row.data());
  }
  png_write_end(wr.png, nullptr);
}

std::vector<std::string> list_pngs(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error(dir + " is not a directory");
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

FrameSequence<double> read_sequence(const std::string& dir, Tier tier, int scale_factor) {
  FrameSequence<double> seq;
  seq.tier = tier;
  seq.scale_factor = scale_factor;
  for (const auto& p : list_pngs(dir)) seq.frames.push_back(read_png(p));
  if (seq.frames.empty()) throw std::runtime_error(dir + ": no PNG frames found");
  validate_uniform_shape(seq, dir);
  return seq;
}

void write_sequence(const std::string& dir, const FrameSequence<double>& seq) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  char name[32];
  for (int t = 0; t < seq.length(); ++t) {
    std::snprintf(name, sizeof(name), "%08d.png", t);
    write_png((fs::path(dir) / name).string(), seq.frames[t]);
  }
}

}  // namespace dynavsr::io
