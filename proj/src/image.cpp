// SPDX-License-Identifier: Apache-2.0
#include "forge/image.hpp"

#include <png.h>

#include <cstring>
#include <utility>

#include "forge/error.hpp"

namespace forge {

namespace {

// RAII over the simplified libpng reader.
class PngReader {
 public:
  explicit PngReader(const std::filesystem::path& path) : path_(path) {
    std::memset(&image_, 0, sizeof(image_));
    image_.version = PNG_IMAGE_VERSION;
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorKind::kIo, path.string() + ": file not found");
    }
    if (png_image_begin_read_from_file(&image_, path.c_str()) == 0) {
      throw Error(ErrorKind::kDecode, fail_message());
    }
  }
  ~PngReader() { png_image_free(&image_); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  png_uint_32 file_format() const { return image_.format; }
  Dims dims() const { return {image_.width, image_.height}; }

  std::vector<std::uint8_t> read(png_uint_32 format) {
    image_.format = format;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image_));
    if (png_image_finish_read(&image_, nullptr, buffer.data(), 0, nullptr) ==
        0) {
      throw Error(ErrorKind::kDecode, fail_message());
    }
    return buffer;
  }

 private:
  std::string fail_message() const {
    return path_.string() + ": decode error: " + image_.message;
  }

  std::filesystem::path path_;
  png_image image_;
};

void write_png(const std::filesystem::path& path, Dims dims,
               png_uint_32 format, const std::uint8_t* pixels) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(dims.width);
  image.height = static_cast<png_uint_32>(dims.height);
  image.format = format;
  image.flags = PNG_IMAGE_FLAG_FAST;
  if (png_image_write_to_file(&image, path.c_str(), 0, pixels, 0, nullptr) ==
      0) {
    std::string message = path.string() + ": write error: " + image.message;
    png_image_free(&image);
    throw Error(ErrorKind::kIo, message);
  }
  png_image_free(&image);
}

}  // namespace

std::string to_string(Dims dims) {
  return std::to_string(dims.width) + "x" + std::to_string(dims.height);
}

ImageBuffer::ImageBuffer(std::size_t width, std::size_t height,
                         std::size_t channels)
    : ImageBuffer(width, height, channels,
                  std::vector<std::uint8_t>(width * height * channels, 0)) {}

ImageBuffer::ImageBuffer(std::size_t width, std::size_t height,
                         std::size_t channels, std::vector<std::uint8_t> data)
    : width_(width),
      height_(height),
      channels_(channels),
      data_(std::move(data)) {
  if (width == 0 || height == 0) {
    throw Error(ErrorKind::kInvalidArgument, "image extents must be positive");
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorKind::kUnsupportedFormat,
                "image must have 1 or 3 channels, got " +
                    std::to_string(channels));
  }
  if (data_.size() != width * height * channels) {
    throw Error(ErrorKind::kInvalidArgument,
                "image data length " + std::to_string(data_.size()) +
                    " does not match " + std::to_string(width) + "x" +
                    std::to_string(height) + "x" + std::to_string(channels));
  }
}

BinaryMask::BinaryMask(Dims dims, std::uint8_t fill)
    : dims_(dims), values_(dims.pixels(), fill ? 1 : 0) {}

BinaryMask::BinaryMask(Dims dims, std::vector<std::uint8_t> values)
    : dims_(dims), values_(std::move(values)) {
  if (values_.size() != dims.pixels()) {
    throw Error(ErrorKind::kInvalidArgument,
                "mask data length does not match " + to_string(dims));
  }
  for (auto& v : values_) v = v ? 1 : 0;
}

RegionMaskSet::RegionMaskSet(BinaryMask face_mask, BinaryMask eyes_mask,
                             BinaryMask teeth_mask, BinaryMask contour_mask)
    : face(std::move(face_mask)),
      eyes(std::move(eyes_mask)),
      teeth(std::move(teeth_mask)),
      contour(std::move(contour_mask)) {
  const Dims d = face.dims();
  if (eyes.dims() != d || teeth.dims() != d || contour.dims() != d) {
    throw Error(ErrorKind::kDimensionMismatch,
                "region masks have inconsistent dimensions");
  }
}

ImageBuffer load_image(const std::filesystem::path& path) {
  PngReader reader(path);
  const png_uint_32 format = reader.file_format();
  if (format & PNG_FORMAT_FLAG_LINEAR) {
    throw Error(ErrorKind::kUnsupportedFormat,
                path.string() + ": unsupported bit depth (16-bit)");
  }
  const bool color = format & PNG_FORMAT_FLAG_COLOR;
  const bool alpha = format & PNG_FORMAT_FLAG_ALPHA;
  const std::size_t channels = color ? 3 : 1;
  const Dims dims = reader.dims();

  if (!alpha) {
    return ImageBuffer(dims.width, dims.height, channels,
                       reader.read(color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY));
  }
  // Alpha is dropped, not composited.
  auto with_alpha = reader.read(color ? PNG_FORMAT_RGBA : PNG_FORMAT_GA);
  const std::size_t stride = channels + 1;
  std::vector<std::uint8_t> data(dims.pixels() * channels);
  for (std::size_t p = 0; p < dims.pixels(); ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      data[p * channels + c] = with_alpha[p * stride + c];
    }
  }
  return ImageBuffer(dims.width, dims.height, channels, std::move(data));
}

void save_image(const ImageBuffer& image, const std::filesystem::path& path) {
  write_png(path, image.dims(),
            image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY,
            image.data().data());
}

BinaryMask load_mask(const std::filesystem::path& path, Dims expected_dims) {
  PngReader reader(path);
  const png_uint_32 format = reader.file_format();
  if (format & PNG_FORMAT_FLAG_LINEAR) {
    throw Error(ErrorKind::kUnsupportedFormat,
                path.string() + ": unsupported bit depth (16-bit)");
  }
  if (format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA)) {
    throw Error(ErrorKind::kUnsupportedFormat,
                path.string() + ": mask must be single-channel");
  }
  if (reader.dims() != expected_dims) {
    throw Error(ErrorKind::kDimensionMismatch,
                path.string() + ": mask is " + to_string(reader.dims()) +
                    ", expected " + to_string(expected_dims));
  }
  auto raw = reader.read(PNG_FORMAT_GRAY);
  for (auto& v : raw) v = v > 127 ? 1 : 0;
  return BinaryMask(expected_dims, std::move(raw));
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> encoded(mask.values().begin(),
                                    mask.values().end());
  for (auto& v : encoded) v = v ? 255 : 0;
  write_png(path, mask.dims(), PNG_FORMAT_GRAY, encoded.data());
}

}  // namespace forge
