// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "forge/image.hpp"

namespace forge {

/// Cardinality of the symmetric difference |{p : a(p) != b(p)}|.
std::int64_t non_overlap_count(const BinaryMask& a, const BinaryMask& b);

std::int64_t area(const BinaryMask& mask);

BinaryMask complement(const BinaryMask& mask);

/// Counts masked pixels whose per-pixel difference strictly exceeds
/// `intensity_thresh`. The per-pixel difference is the largest absolute
/// channel deviation.
std::int64_t thresholded_diff_count(const ImageBuffer& a, const ImageBuffer& b,
                                    const BinaryMask& mask,
                                    double intensity_thresh);

/// Throws Error(kDimensionMismatch / kChannelMismatch) unless the two images
/// and the mask share extents and the images share a channel count.
void require_conformable(const ImageBuffer& a, const ImageBuffer& b,
                         const BinaryMask& mask);

}  // namespace forge
