// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dynavsr/image.hpp"

namespace dynavsr::io {

struct PngInfo {
  int height = 0;
  int width = 0;
  int channels = 0;
};

// Header-only probe; does not decode pixel data.
PngInfo probe_png(const std::string& path);

// Decodes to [0,1] doubles. Palette and 16-bit inputs are normalized to
// 8-bit; alpha is dropped.
Image<double> read_png(const std::string& path);

// Clamps to [0,1] and writes 8-bit gray or RGB depending on channel count.
void write_png(const std::string& path, const Image<double>& im);

// Lexicographically sorted *.png paths directly inside `dir`.
std::vector<std::string> list_pngs(const std::string& dir);

// Reads all frames of a directory as one sequence; every frame must share
// one shape.
FrameSequence<double> read_sequence(const std::string& dir, Tier tier, int scale_factor);

// Writes frames as 00000000.png, 00000001.png, ... creating `dir` first.
void write_sequence(const std::string& dir, const FrameSequence<double>& seq);

}  // namespace dynavsr::io
