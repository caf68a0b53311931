// SPDX-License-Identifier: Apache-2.0
#include "forge/mask_algebra.hpp"

#include <algorithm>
#include <cstdlib>
#include <vector>

#include "forge/error.hpp"

namespace forge {

namespace {

void require_same_dims(Dims a, Dims b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(what) + ": dimension mismatch " + to_string(a) +
                    " vs " + to_string(b));
  }
}

}  // namespace

std::int64_t non_overlap_count(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a.dims(), b.dims(), "non_overlap_count");
  const auto va = a.values();
  const auto vb = b.values();
  std::int64_t count = 0;
  for (std::size_t i = 0; i < va.size(); ++i) count += (va[i] != vb[i]);
  return count;
}

std::int64_t area(const BinaryMask& mask) {
  std::int64_t count = 0;
  for (auto v : mask.values()) count += v;
  return count;
}

BinaryMask complement(const BinaryMask& mask) {
  std::vector<std::uint8_t> out(mask.values().size());
  std::transform(mask.values().begin(), mask.values().end(), out.begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v ? 0 : 1; });
  return BinaryMask(mask.dims(), std::move(out));
}

void require_conformable(const ImageBuffer& a, const ImageBuffer& b,
                         const BinaryMask& mask) {
  require_same_dims(a.dims(), b.dims(), "image pair");
  require_same_dims(a.dims(), mask.dims(), "image/mask");
  if (a.channels() != b.channels()) {
    throw Error(ErrorKind::kChannelMismatch,
                "channel mismatch: " + std::to_string(a.channels()) + " vs " +
                    std::to_string(b.channels()));
  }
}

std::int64_t thresholded_diff_count(const ImageBuffer& a, const ImageBuffer& b,
                                    const BinaryMask& mask,
                                    double intensity_thresh) {
  require_conformable(a, b, mask);
  const std::size_t channels = a.channels();
  const auto da = a.data();
  const auto db = b.data();
  const auto m = mask.values();
  std::int64_t count = 0;
  for (std::size_t p = 0; p < m.size(); ++p) {
    if (!m[p]) continue;
    int diff = 0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = p * channels + c;
      diff = std::max(diff, std::abs(int(da[i]) - int(db[i])));
    }
    count += (diff > intensity_thresh);
  }
  return count;
}

}  // namespace forge
