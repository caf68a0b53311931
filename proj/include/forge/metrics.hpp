// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "forge/image.hpp"
#include "forge/manifest.hpp"

namespace forge {

// Gaussian-window SSIM parameters (Wang et al. 2004 defaults).
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kSsimRange = 255.0;

/// Rec.601 luma as doubles, row-major. Single-channel images pass through.
std::vector<double> luminance(const ImageBuffer& image);

/// Mean of the local SSIM map over all fully-contained 11x11 windows,
/// computed on luminance. Throws if the images differ in size or are
/// smaller than the window.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

/// Mean squared error over background (non-face) pixels and all channels,
/// on the 0-255 scale.
double l2m(const ImageBuffer& source, const ImageBuffer& generated,
           const BinaryMask& face_mask);

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
};

/// Cosine similarity; throws on dimension mismatch or zero vectors.
double clip_i(const EmbeddingVector& a, const EmbeddingVector& b);

/// EMB1 file: "EMB1", u32 little-endian dim, dim little-endian f32.
EmbeddingVector read_embedding(const std::filesystem::path& path);
void write_embedding(const EmbeddingVector& embedding,
                     const std::filesystem::path& path);

/// Pass-rate accounting over a filtered manifest. Error records are counted
/// apart and excluded from the rate.
struct PassRateSummary {
  std::int64_t total = 0;
  std::int64_t errors = 0;
  std::int64_t passed = 0;
  std::array<std::int64_t, 3> rejections{};  // indexed like kFilterOrder
  std::int64_t manual_labeled = 0;
  std::int64_t manual_passed = 0;

  std::int64_t valid() const { return total - errors; }
  std::int64_t failed() const { return valid() - passed; }
  /// passed / valid; throws when there are no valid records.
  double pass_rate() const;
  std::optional<double> manual_pass_rate() const;

  PassRateSummary& operator+=(const PassRateSummary& other);
};

/// Tallies one record. Throws Error(kManifest) if the record has neither
/// verdicts nor an error.
void accumulate(PassRateSummary& summary, const PairRecord& record);

/// Throws Error(kManifest) on an empty manifest.
PassRateSummary pass_rate(const std::vector<PairRecord>& records);

struct MetricsSummary {
  std::int64_t count = 0;
  std::int64_t clip_count = 0;
  double ssim_sum = 0;
  double l2m_sum = 0;
  double clip_sum = 0;

  std::optional<double> mean_clip_i() const;
  std::optional<double> mean_ssim() const;
  std::optional<double> mean_l2m() const;

  MetricsSummary& operator+=(const MetricsSummary& other);
};

void accumulate(MetricsSummary& summary, const MetricsRow& row);

}  // namespace forge
