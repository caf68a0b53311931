// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace forge {

struct Dims {
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t pixels() const { return width * height; }
  bool operator==(const Dims&) const = default;
};

std::string to_string(Dims dims);

/// Row-major 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
class ImageBuffer {
 public:
  ImageBuffer(std::size_t width, std::size_t height, std::size_t channels);
  ImageBuffer(std::size_t width, std::size_t height, std::size_t channels,
              std::vector<std::uint8_t> data);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t channels() const { return channels_; }
  Dims dims() const { return {width_, height_}; }

  std::size_t offset(std::size_t x, std::size_t y, std::size_t c) const {
    return (y * width_ + x) * channels_ + c;
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return data_[offset(x, y, c)];
  }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return data_[offset(x, y, c)];
  }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  bool operator==(const ImageBuffer&) const = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::size_t channels_;
  std::vector<std::uint8_t> data_;
};

/// Binary mask, one byte per pixel holding 0 or 1.
class BinaryMask {
 public:
  explicit BinaryMask(Dims dims, std::uint8_t fill = 0);
  BinaryMask(Dims dims, std::vector<std::uint8_t> values);

  Dims dims() const { return dims_; }
  std::size_t width() const { return dims_.width; }
  std::size_t height() const { return dims_.height; }

  bool at(std::size_t x, std::size_t y) const {
    return values_[y * dims_.width + x] != 0;
  }
  void set(std::size_t x, std::size_t y, bool on) {
    values_[y * dims_.width + x] = on ? 1 : 0;
  }

  std::span<const std::uint8_t> values() const { return values_; }

  bool operator==(const BinaryMask&) const = default;

 private:
  Dims dims_;
  std::vector<std::uint8_t> values_;
};

/// Parsed facial regions of one image. No subset relation between the
/// regions is assumed; parsers are noisy.
struct RegionMaskSet {
  BinaryMask face;
  BinaryMask eyes;
  BinaryMask teeth;
  BinaryMask contour;

  RegionMaskSet(BinaryMask face, BinaryMask eyes, BinaryMask teeth,
                BinaryMask contour);

  Dims dims() const { return face.dims(); }
};

ImageBuffer load_image(const std::filesystem::path& path);
void save_image(const ImageBuffer& image, const std::filesystem::path& path);

/// Reads a single-channel 8-bit PNG; values > 127 become 1.
BinaryMask load_mask(const std::filesystem::path& path, Dims expected_dims);
/// Writes 0/255 single-channel PNG.
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

}  // namespace forge
