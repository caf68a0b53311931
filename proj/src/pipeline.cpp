// SPDX-License-Identifier: Apache-2.0
#include "forge/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "forge/error.hpp"
#include "forge/filters.hpp"

namespace forge {

namespace fs = std::filesystem;

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count;
           i = next.fetch_add(1)) {
        fn(i);
      }
    });
  }
}

std::vector<PairRecord> filter_records(std::vector<PairRecord> records,
                                       const FilterConfig& config,
                                       std::size_t workers) {
  config.validate();
  parallel_for(records.size(), workers, [&](std::size_t i) {
    PairRecord& r = records[i];
    r.verdicts.clear();
    r.passed.reset();
    r.error.reset();
    try {
      const PairResources resources = load_pair_resources(r);
      r.verdicts = run_all_filters(r, resources, config);
      r.passed = all_passed(r.verdicts);
    } catch (const std::exception& e) {
      r.verdicts.clear();
      r.error = e.what();
    }
  });
  return records;
}

FilterRunSummary run_filter_pipeline(const fs::path& manifest_in,
                                     const PipelineConfig& config) {
  auto records =
      filter_records(read_manifest(manifest_in), config.filter, config.workers);

  FilterRunSummary summary;
  summary.total = records.size();
  std::vector<PairRecord> rejected;
  for (const auto& r : records) {
    if (r.error) {
      ++summary.errors;
    } else if (*r.passed) {
      ++summary.passed;
    } else {
      ++summary.failed;
      rejected.push_back(r);
    }
  }
  write_manifest(config.out, records);
  if (config.rejected) write_manifest(*config.rejected, rejected);
  return summary;
}

std::vector<PairRecord> measure_records(std::vector<PairRecord> records,
                                        bool with_embeddings,
                                        std::size_t workers,
                                        MetricsRunSummary& summary) {
  std::vector<char> missing(records.size(), 0);
  parallel_for(records.size(), workers, [&](std::size_t i) {
    PairRecord& r = records[i];
    r.metrics.reset();
    try {
      const ImageBuffer source = load_image(r.source_path);
      const ImageBuffer generated = load_image(r.generated_path);
      const BinaryMask face = load_mask(r.source_masks.face, source.dims());
      MetricsRow row;
      row.ssim = ssim(source, generated);
      row.l2m = l2m(source, generated, face);
      if (with_embeddings) {
        const fs::path ref =
            embedding_path_for(r.reference_path.value_or(r.source_path));
        const fs::path gen = embedding_path_for(r.generated_path);
        if (fs::exists(ref) && fs::exists(gen)) {
          row.clip_i = clip_i(read_embedding(ref), read_embedding(gen));
        } else {
          missing[i] = 1;
        }
      }
      r.metrics = row;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });

  // Serial, in record order, so the sums do not depend on scheduling.
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].metrics) {
      accumulate(summary.metrics, *records[i].metrics);
    } else {
      ++summary.errors;
    }
    summary.missing_embeddings += missing[i];
  }
  return records;
}

MetricsRunSummary run_metrics(const fs::path& manifest_in,
                              const fs::path& manifest_out,
                              bool with_embeddings, std::size_t workers) {
  MetricsRunSummary summary;
  auto records = measure_records(read_manifest(manifest_in), with_embeddings,
                                 workers, summary);
  write_manifest(manifest_out, records);
  return summary;
}

std::string format_metrics_table(const std::string& label,
                                 const MetricsSummary& s) {
  auto cell = [](std::optional<double> v, const char* fmt) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof(buf), fmt, *v);
    return std::string(buf);
  };
  char line[256];
  std::string out;
  std::snprintf(line, sizeof(line), "%-24s %8s %8s %8s\n", "Dataset", "CLIP-I",
                "SSIM", "L2-M");
  out += line;
  std::snprintf(line, sizeof(line), "%-24s %8s %8s %8s\n", label.c_str(),
                cell(s.mean_clip_i(), "%.3f").c_str(),
                cell(s.mean_ssim(), "%.3f").c_str(),
                cell(s.mean_l2m(), "%.2f").c_str());
  out += line;
  return out;
}

double pass_rate_percent(const PassRateSummary& summary) {
  return std::round(summary.pass_rate() * 1000.0) / 10.0;
}

Report build_report(const std::vector<PairRecord>& records) {
  Report rep;
  rep.json = ordered_json::object();
  if (records.empty()) {
    rep.text = "0 pairs\n";
    rep.json["pairs"] = 0;
    return rep;
  }
  rep.pass = pass_rate(records);
  for (const auto& r : records) {
    if (r.metrics) accumulate(rep.metrics, *r.metrics);
  }

  const auto& p = rep.pass;
  char buf[128];
  rep.text += std::to_string(p.total) + " pairs (valid " +
              std::to_string(p.valid()) + ", errors " +
              std::to_string(p.errors) + ")\n";
  rep.text += "passed: " + std::to_string(p.passed) + "\n";
  rep.json["pairs"] = p.total;
  rep.json["valid"] = p.valid();
  rep.json["errors"] = p.errors;
  rep.json["passed"] = p.passed;
  if (p.valid() > 0) {
    const double pct = pass_rate_percent(p);
    std::snprintf(buf, sizeof(buf), "PR: %.1f%%\n", pct);
    rep.text += buf;
    rep.json["pass_rate"] = p.pass_rate();
    rep.json["pass_rate_percent"] = pct;
  } else {
    rep.text += "PR: n/a (no valid pairs)\n";
    rep.json["pass_rate"] = nullptr;
    rep.json["pass_rate_percent"] = nullptr;
  }

  rep.text += "rejections:";
  ordered_json rejections = ordered_json::object();
  for (FilterName f : kFilterOrder) {
    const auto n = p.rejections[static_cast<std::size_t>(f)];
    rep.text += " " + std::string(to_string(f)) + "=" + std::to_string(n);
    rejections[std::string(to_string(f))] = n;
  }
  rep.text += "\n";
  rep.json["rejections"] = std::move(rejections);

  if (auto manual = p.manual_pass_rate()) {
    std::snprintf(buf, sizeof(buf), "manual PR: %.1f%% (%lld labeled)\n",
                  std::round(*manual * 1000.0) / 10.0,
                  static_cast<long long>(p.manual_labeled));
    rep.text += buf;
    rep.json["manual_labeled"] = p.manual_labeled;
    rep.json["manual_pass_rate"] = *manual;
  }

  if (rep.metrics.count > 0) {
    rep.text += format_metrics_table("manifest", rep.metrics);
    ordered_json m;
    m["count"] = rep.metrics.count;
    if (auto c = rep.metrics.mean_clip_i()) m["clip_i"] = *c;
    m["ssim"] = *rep.metrics.mean_ssim();
    m["l2m"] = *rep.metrics.mean_l2m();
    rep.json["metrics"] = std::move(m);
  }
  return rep;
}

}  // namespace forge
