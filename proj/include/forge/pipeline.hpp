// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "forge/config.hpp"
#include "forge/manifest.hpp"
#include "forge/metrics.hpp"

namespace forge {

/// Calls fn(i) for every i in [0, count) on `workers` threads. Items are
/// claimed dynamically; fn must not throw and must only touch item i.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

struct PipelineConfig {
  FilterConfig filter;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::optional<std::filesystem::path> rejected;
};

struct FilterRunSummary {
  std::size_t total = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t errors = 0;
};

/// Annotates each record with three verdicts and an overall `passed` flag,
/// or with `error` when its resources cannot be used. Record order is kept
/// regardless of worker count.
std::vector<PairRecord> filter_records(std::vector<PairRecord> records,
                                       const FilterConfig& config,
                                       std::size_t workers);

/// Reads `manifest_in`, filters it, writes `config.out` and, when set, the
/// rejected sidecar (failed records only; error records stay out of it).
FilterRunSummary run_filter_pipeline(const std::filesystem::path& manifest_in,
                                     const PipelineConfig& config);

struct MetricsRunSummary {
  MetricsSummary metrics;
  std::size_t errors = 0;
  std::size_t missing_embeddings = 0;
};

/// Adds ssim / l2m (and clip_i when `with_embeddings` and both .emb
/// sidecars exist) to each record.
std::vector<PairRecord> measure_records(std::vector<PairRecord> records,
                                        bool with_embeddings,
                                        std::size_t workers,
                                        MetricsRunSummary& summary);

MetricsRunSummary run_metrics(const std::filesystem::path& manifest_in,
                              const std::filesystem::path& manifest_out,
                              bool with_embeddings, std::size_t workers);

/// One row in the CLIP-I / SSIM / L2-M table layout.
std::string format_metrics_table(const std::string& label,
                                 const MetricsSummary& summary);

struct Report {
  PassRateSummary pass;
  MetricsSummary metrics;
  std::string text;
  ordered_json json;
};

/// Pass rate with one decimal, as printed in reports ("6.8").
double pass_rate_percent(const PassRateSummary& summary);

/// Builds the human-readable and JSON summaries from one pass over the
/// records. An empty manifest yields a "0 pairs" report.
Report build_report(const std::vector<PairRecord>& records);

enum class DefectClass { kClean, kMisaligned, kNoMakeup, kBackgroundShift };

std::string to_string(DefectClass defect);

/// Which filters a pair of this class is built to pass, in kFilterOrder.
std::array<bool, 3> expected_passes(DefectClass defect);

struct CorpusSpec {
  std::uint64_t seed = 0;
  std::map<DefectClass, std::size_t> counts;
  Dims dims{128, 128};
  std::filesystem::path out_dir;
  std::size_t workers = 1;
  /// Translation of misaligned masks as a fraction of the face width.
  double misalignment_shift = 0.15;
};

/// Writes images, masks and `manifest.jsonl` under out_dir. Each record
/// carries its class under "label". Returns the manifest path.
std::filesystem::path gen_synthetic_corpus(const CorpusSpec& spec);

/// Parses "clean=10,misaligned=5,..." (missing classes count 0).
std::map<DefectClass, std::size_t> parse_corpus_counts(const std::string& s);
/// Parses "WxH".
Dims parse_dims(const std::string& s);

}  // namespace forge
