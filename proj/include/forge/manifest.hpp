// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace forge {

using ordered_json = nlohmann::ordered_json;

enum class FilterName { kMisalignment, kMakeupFailed, kBackground };

inline constexpr std::array<FilterName, 3> kFilterOrder = {
    FilterName::kMisalignment, FilterName::kMakeupFailed,
    FilterName::kBackground};

std::string_view to_string(FilterName name);
FilterName filter_name_from_string(std::string_view name);

struct FilterVerdict {
  FilterName filter_name = FilterName::kMisalignment;
  bool passed = false;
  double statistic = 0;
  double threshold_used = 0;
  std::string reason;

  bool operator==(const FilterVerdict&) const = default;
};

struct MetricsRow {
  std::optional<double> clip_i;
  double ssim = 0;
  double l2m = 0;
};

struct RegionPaths {
  std::filesystem::path face;
  std::filesystem::path eyes;
  std::filesystem::path teeth;
  std::filesystem::path contour;
};

/// One source/generated pair. Paths are absolute once loaded; unknown
/// fields of the input line are carried through untouched in `extra`.
struct PairRecord {
  std::string id;
  std::filesystem::path source_path;
  std::filesystem::path generated_path;
  std::string prompt_tag;
  RegionPaths source_masks;
  RegionPaths generated_masks;
  // Style reference for CLIP-I; when absent CLIP-I compares source and
  // generated.
  std::optional<std::filesystem::path> reference_path;

  std::vector<FilterVerdict> verdicts;
  std::optional<bool> passed;
  std::optional<std::string> error;
  std::optional<MetricsRow> metrics;

  ordered_json extra = ordered_json::object();
};

/// Parses one manifest line. Relative paths resolve against `base_dir`.
PairRecord record_from_json(const ordered_json& j,
                            const std::filesystem::path& base_dir);

/// Serializes with a fixed key order. Paths are written relative to
/// `base_dir` where possible.
ordered_json record_to_json(const PairRecord& record,
                            const std::filesystem::path& base_dir);

ordered_json to_json(const FilterVerdict& verdict);
FilterVerdict verdict_from_json(const ordered_json& j);

/// Reads a line-delimited manifest. Blank lines are skipped. Throws
/// Error(kManifest) on unreadable files, malformed lines, or duplicate ids.
std::vector<PairRecord> read_manifest(const std::filesystem::path& path);

/// Writes one compact JSON object per line, in record order.
void write_manifest(const std::filesystem::path& path,
                    const std::vector<PairRecord>& records);

std::string serialize_record(const PairRecord& record,
                             const std::filesystem::path& base_dir);

/// Embedding sidecar for an image: the image path with ".emb" appended.
std::filesystem::path embedding_path_for(const std::filesystem::path& image);

}  // namespace forge
