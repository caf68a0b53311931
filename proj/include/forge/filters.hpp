// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "forge/config.hpp"
#include "forge/image.hpp"
#include "forge/manifest.hpp"

namespace forge {

/// Outcome of comparing one parsed region between source and generated.
struct RegionCheck {
  std::string region;
  bool skipped = false;  // region below min_region_area in both images
  std::int64_t non_overlap = 0;
  double statistic = 0;
  double threshold = 0;

  bool failed() const { return !skipped && statistic > threshold; }
};

/// Per-region statistics for face, contour, eyes and teeth, in that order.
/// Face and contour are both held to face_thresh.
std::vector<RegionCheck> misalignment_regions(const RegionMaskSet& source,
                                              const RegionMaskSet& generated,
                                              const FilterConfig& config);

FilterVerdict misalignment_filter(const RegionMaskSet& source,
                                  const RegionMaskSet& generated,
                                  const FilterConfig& config);

/// Fails when too few face pixels changed (count <= mu_pixel_thresh).
FilterVerdict makeup_failed_filter(const ImageBuffer& source,
                                   const ImageBuffer& generated,
                                   const BinaryMask& source_face,
                                   const FilterConfig& config);

/// Fails when too many background pixels changed (count > bg_pixel_thresh).
FilterVerdict background_filter(const ImageBuffer& source,
                                const ImageBuffer& generated,
                                const BinaryMask& source_face,
                                const FilterConfig& config);

/// Everything the filters and metrics need for one pair, decoded.
struct PairResources {
  ImageBuffer source;
  ImageBuffer generated;
  RegionMaskSet source_masks;
  RegionMaskSet generated_masks;
};

/// Loads both images and all eight masks. Channel-count or size mismatches
/// between the two images are load errors.
PairResources load_pair_resources(const PairRecord& record);

/// Runs misalignment, makeup and background filters in that order. All three
/// always run. Errors are rethrown prefixed with the pair id.
std::vector<FilterVerdict> run_all_filters(const PairRecord& pair,
                                           const PairResources& resources,
                                           const FilterConfig& config);

inline bool all_passed(const std::vector<FilterVerdict>& verdicts) {
  for (const auto& v : verdicts) {
    if (!v.passed) return false;
  }
  return !verdicts.empty();
}

}  // namespace forge
