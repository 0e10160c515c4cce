// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace visrssi {

/// 8-bit RGB raster, interleaved row-major (HWC).
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

  std::uint8_t* at(std::size_t x, std::size_t y) { return pixels.data() + (y * width + x) * 3; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const { return pixels.data() + (y * width + x) * 3; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Binary P6 with maxval 255.
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);
/// Dispatches on extension (.ppm or .png).
RgbImage read_image(const std::filesystem::path& path);

/// Bilinear resampling with half-pixel centers and edge clamping.
RgbImage resize_bilinear(const RgbImage& src, std::size_t width, std::size_t height);

}  // namespace visrssi
