// SPDX-License-Identifier: Apache-2.0
#include "forge/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "forge/error.hpp"

namespace forge {

namespace {

void check_range(const char* key, double value, double lo, double hi) {
  if (!std::isfinite(value) || value < lo || value > hi) {
    throw Error(ErrorKind::kConfig, std::string(key) + " = " +
                                        std::to_string(value) +
                                        " outside [" + std::to_string(lo) +
                                        ", " + std::to_string(hi) + "]");
  }
}

}  // namespace

std::string to_string(ThresholdMode mode) {
  return mode == ThresholdMode::kFraction ? "fraction" : "absolute";
}

void FilterConfig::validate() const {
  check_range("mu_thresh", mu_thresh, 0, 255);
  check_range("bg_thresh", bg_thresh, 0, 255);
  // A symmetric difference can exceed the source area, so region
  // fractions are only bounded below.
  check_range("face_thresh", face_thresh, 0, HUGE_VAL);
  check_range("eye_thresh", eye_thresh, 0, HUGE_VAL);
  check_range("teeth_thresh", teeth_thresh, 0, HUGE_VAL);
  const double hi =
      threshold_mode == ThresholdMode::kFraction ? 1.0 : HUGE_VAL;
  check_range("mu_pixel_thresh", mu_pixel_thresh, 0, hi);
  check_range("bg_pixel_thresh", bg_pixel_thresh, 0, hi);
  if (min_region_area < 0) {
    throw Error(ErrorKind::kConfig, "min_region_area must be non-negative");
  }
}

FilterConfig filter_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw Error(ErrorKind::kConfig, "config must be a JSON object");
  }
  static const std::set<std::string> known = {
      "threshold_mode", "face_thresh",     "eye_thresh",
      "teeth_thresh",   "mu_thresh",       "mu_pixel_thresh",
      "bg_thresh",      "bg_pixel_thresh", "min_region_area"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw Error(ErrorKind::kConfig, "unknown config key '" + key + "'");
    }
  }

  FilterConfig config;
  try {
    if (j.contains("threshold_mode")) {
      const auto mode = j.at("threshold_mode").get<std::string>();
      if (mode == "fraction") {
        config.threshold_mode = ThresholdMode::kFraction;
      } else if (mode == "absolute") {
        config.threshold_mode = ThresholdMode::kAbsolute;
      } else {
        throw Error(ErrorKind::kConfig, "threshold_mode must be 'fraction' or "
                                        "'absolute', got '" + mode + "'");
      }
    }
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    read("face_thresh", config.face_thresh);
    read("eye_thresh", config.eye_thresh);
    read("teeth_thresh", config.teeth_thresh);
    read("mu_thresh", config.mu_thresh);
    read("mu_pixel_thresh", config.mu_pixel_thresh);
    read("bg_thresh", config.bg_thresh);
    read("bg_pixel_thresh", config.bg_pixel_thresh);
    read("min_region_area", config.min_region_area);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("bad config value: ") + e.what());
  }
  config.validate();
  return config;
}

nlohmann::json to_json(const FilterConfig& config) {
  return {{"threshold_mode", to_string(config.threshold_mode)},
          {"face_thresh", config.face_thresh},
          {"eye_thresh", config.eye_thresh},
          {"teeth_thresh", config.teeth_thresh},
          {"mu_thresh", config.mu_thresh},
          {"mu_pixel_thresh", config.mu_pixel_thresh},
          {"bg_thresh", config.bg_thresh},
          {"bg_pixel_thresh", config.bg_pixel_thresh},
          {"min_region_area", config.min_region_area}};
}

FilterConfig load_filter_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kConfig, path.string() + ": cannot open config");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  return filter_config_from_json(j);
}

}  // namespace forge
