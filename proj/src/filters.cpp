// SPDX-License-Identifier: Apache-2.0
#include "forge/filters.hpp"

#include <algorithm>
#include <cstdio>

#include "forge/error.hpp"
#include "forge/mask_algebra.hpp"

namespace forge {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

bool fraction_mode(const FilterConfig& config) {
  return config.threshold_mode == ThresholdMode::kFraction;
}

double normalize(std::int64_t count, std::int64_t denominator,
                 const FilterConfig& config) {
  if (!fraction_mode(config)) return static_cast<double>(count);
  return static_cast<double>(count) /
         static_cast<double>(std::max<std::int64_t>(denominator, 1));
}

RegionCheck check_region(std::string name, const BinaryMask& source,
                         const BinaryMask& generated, double threshold,
                         const FilterConfig& config) {
  RegionCheck check;
  check.region = std::move(name);
  check.threshold = threshold;
  const std::int64_t source_area = area(source);
  const std::int64_t generated_area = area(generated);
  const bool source_small = source_area < config.min_region_area;
  const bool generated_small = generated_area < config.min_region_area;
  if (source_small && generated_small) {
    check.skipped = true;
    return check;
  }
  if (source_small != generated_small) {
    // A region that appears or vanishes counts as wholly misaligned.
    check.non_overlap = std::max(source_area, generated_area);
  } else {
    check.non_overlap = non_overlap_count(source, generated);
  }
  check.statistic = normalize(check.non_overlap, source_area, config);
  return check;
}

}  // namespace

std::vector<RegionCheck> misalignment_regions(const RegionMaskSet& source,
                                              const RegionMaskSet& generated,
                                              const FilterConfig& config) {
  if (source.dims() != generated.dims()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "mask sets differ in size: " + to_string(source.dims()) +
                    " vs " + to_string(generated.dims()));
  }
  return {
      check_region("face", source.face, generated.face, config.face_thresh,
                   config),
      check_region("contour", source.contour, generated.contour,
                   config.face_thresh, config),
      check_region("eyes", source.eyes, generated.eyes, config.eye_thresh,
                   config),
      check_region("teeth", source.teeth, generated.teeth, config.teeth_thresh,
                   config),
  };
}

FilterVerdict misalignment_filter(const RegionMaskSet& source,
                                  const RegionMaskSet& generated,
                                  const FilterConfig& config) {
  const auto regions = misalignment_regions(source, generated, config);

  // Worst region = largest statistic - threshold among checked regions.
  const RegionCheck* worst = nullptr;
  for (const auto& r : regions) {
    if (r.skipped) continue;
    if (!worst ||
        r.statistic - r.threshold > worst->statistic - worst->threshold) {
      worst = &r;
    }
  }

  FilterVerdict v;
  v.filter_name = FilterName::kMisalignment;
  if (!worst) {
    v.passed = true;
    v.statistic = 0;
    v.threshold_used = config.face_thresh;
    v.reason = "all regions below min_region_area";
    return v;
  }
  v.statistic = worst->statistic;
  v.threshold_used = worst->threshold;
  v.passed = !(v.statistic > v.threshold_used);
  if (v.passed) {
    v.reason = "aligned; worst region " + worst->region + " " +
               fmt(v.statistic) + " <= " + fmt(v.threshold_used);
  } else {
    std::string failing;
    for (const auto& r : regions) {
      if (!r.failed()) continue;
      if (!failing.empty()) failing += ",";
      failing += r.region;
    }
    v.reason = "misaligned region " + worst->region + " " + fmt(v.statistic) +
               " > " + fmt(v.threshold_used) + " (failing: " + failing + ")";
  }
  return v;
}

FilterVerdict makeup_failed_filter(const ImageBuffer& source,
                                   const ImageBuffer& generated,
                                   const BinaryMask& source_face,
                                   const FilterConfig& config) {
  require_conformable(source, generated, source_face);
  const std::int64_t face_area = area(source_face);
  if (face_area == 0) {
    throw Error(ErrorKind::kEmptyRegion, "no face region");
  }
  const std::int64_t modified = thresholded_diff_count(
      source, generated, source_face, config.mu_thresh);

  FilterVerdict v;
  v.filter_name = FilterName::kMakeupFailed;
  v.statistic = normalize(modified, face_area, config);
  v.threshold_used = config.mu_pixel_thresh;
  v.passed = v.statistic > v.threshold_used;
  v.reason = (v.passed ? "makeup applied; modified " : "makeup failed; modified ") +
             fmt(v.statistic) + (v.passed ? " > " : " <= ") +
             fmt(v.threshold_used);
  return v;
}

FilterVerdict background_filter(const ImageBuffer& source,
                                const ImageBuffer& generated,
                                const BinaryMask& source_face,
                                const FilterConfig& config) {
  require_conformable(source, generated, source_face);
  const BinaryMask background = complement(source_face);
  const std::int64_t background_area = area(background);
  if (background_area == 0) {
    throw Error(ErrorKind::kEmptyRegion, "no background region");
  }
  const std::int64_t inconsistent = thresholded_diff_count(
      source, generated, background, config.bg_thresh);

  FilterVerdict v;
  v.filter_name = FilterName::kBackground;
  v.statistic = normalize(inconsistent, background_area, config);
  v.threshold_used = config.bg_pixel_thresh;
  v.passed = !(v.statistic > v.threshold_used);
  v.reason = (v.passed ? "background consistent; inconsistent "
                       : "background inconsistent; inconsistent ") +
             fmt(v.statistic) + (v.passed ? " <= " : " > ") +
             fmt(v.threshold_used);
  return v;
}

PairResources load_pair_resources(const PairRecord& record) {
  ImageBuffer source = load_image(record.source_path);
  ImageBuffer generated = load_image(record.generated_path);
  if (source.channels() != generated.channels()) {
    throw Error(ErrorKind::kChannelMismatch,
                "source has " + std::to_string(source.channels()) +
                    " channels, generated has " +
                    std::to_string(generated.channels()));
  }
  if (source.dims() != generated.dims()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "source is " + to_string(source.dims()) + ", generated is " +
                    to_string(generated.dims()));
  }
  const Dims dims = source.dims();
  auto masks = [dims](const RegionPaths& p) {
    return RegionMaskSet(load_mask(p.face, dims), load_mask(p.eyes, dims),
                         load_mask(p.teeth, dims), load_mask(p.contour, dims));
  };
  return PairResources{std::move(source), std::move(generated),
                       masks(record.source_masks),
                       masks(record.generated_masks)};
}

std::vector<FilterVerdict> run_all_filters(const PairRecord& pair,
                                           const PairResources& resources,
                                           const FilterConfig& config) {
  try {
    return {
        misalignment_filter(resources.source_masks, resources.generated_masks,
                            config),
        makeup_failed_filter(resources.source, resources.generated,
                             resources.source_masks.face, config),
        background_filter(resources.source, resources.generated,
                          resources.source_masks.face, config),
    };
  } catch (const Error& e) {
    throw Error(e.kind(), "pair '" + pair.id + "': " + e.what());
  }
}

}  // namespace forge
