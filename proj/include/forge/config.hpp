// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace forge {

enum class ThresholdMode { kFraction, kAbsolute };

/// Thresholds for the three rejection filters.
///
/// Pixel-count thresholds (face/eye/teeth, mu_pixel, bg_pixel) are area
/// fractions in fraction mode and raw pixel counts in absolute mode.
/// Intensity thresholds (mu_thresh, bg_thresh) are always on the 0-255 scale.
struct FilterConfig {
  ThresholdMode threshold_mode = ThresholdMode::kFraction;
  double face_thresh = 0.10;
  double eye_thresh = 0.30;
  double teeth_thresh = 0.50;
  double mu_thresh = 20;
  double mu_pixel_thresh = 0.05;
  double bg_thresh = 25;
  double bg_pixel_thresh = 0.02;
  std::int64_t min_region_area = 32;

  /// Throws Error(kConfig) when a value is out of range for the mode.
  void validate() const;
};

/// JSON object; every key is optional and falls back to the default above.
/// Unknown keys are rejected.
FilterConfig filter_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FilterConfig& config);
FilterConfig load_filter_config(const std::filesystem::path& path);

std::string to_string(ThresholdMode mode);

}  // namespace forge
