// SPDX-License-Identifier: Apache-2.0
//
// forge: curate synthetic paired makeup datasets.
//
//   forge filter --manifest IN --config CFG --out OUT --rejected OUT2 --workers N
//   forge metrics --manifest IN --out OUT [--with-embeddings]
//   forge report --manifest IN [--json]
//   forge gen-corpus --seed S --out DIR --dims WxH --counts clean=..,misaligned=..
//   forge inject-check --seed S [--num-seeds N]
//
// Exit codes: 0 ok, 1 usage/config error, 2 manifest unreadable,
// 3 inject-check property failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

#include "forge/config.hpp"
#include "forge/error.hpp"
#include "forge/injector_checks.hpp"
#include "forge/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitManifest = 2;
constexpr int kExitPropertyFailure = 3;

int exit_code_for(const forge::Error& e) {
  return e.kind() == forge::ErrorKind::kManifest ? kExitManifest : kExitUsage;
}

int run_inject_check(std::uint64_t seed, std::size_t num_seeds,
                     double tolerance_scale) {
  const auto start = std::chrono::steady_clock::now();
  std::size_t failures = 0;
  std::printf("%-8s %-34s %-12s %-10s %s\n", "seed", "check", "measured",
              "tolerance", "result");
  for (std::size_t i = 0; i < num_seeds; ++i) {
    const auto report =
        forge::injector::run_injector_checks(seed + i, tolerance_scale);
    for (const auto& c : report.checks) {
      std::printf("%-8llu %-34s %-12.3e %-10.1e %s  %s\n",
                  static_cast<unsigned long long>(report.seed), c.name.c_str(),
                  c.measured, c.tolerance, c.passed ? "PASS" : "FAIL",
                  c.detail.c_str());
      failures += !c.passed;
    }
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  std::printf("%zu seed(s), %zu failure(s), %.3f s\n", num_seeds, failures,
              secs);
  return failures == 0 ? kExitOk : kExitPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forge: paired makeup dataset curation toolkit"};
  app.require_subcommand(1);

  // filter
  auto* filter = app.add_subcommand("filter", "run the three rejection filters");
  std::string filter_manifest, filter_config, filter_out, filter_rejected;
  std::size_t filter_workers = 1;
  filter->add_option("--manifest", filter_manifest, "input manifest (JSONL)")
      ->required();
  filter->add_option("--config", filter_config, "filter config (JSON)");
  filter->add_option("--out", filter_out, "annotated output manifest")
      ->required();
  filter->add_option("--rejected", filter_rejected,
                     "sidecar manifest of rejected pairs");
  filter->add_option("--workers", filter_workers, "worker threads")
      ->check(CLI::PositiveNumber);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "compute CLIP-I / SSIM / L2-M");
  std::string metrics_manifest, metrics_out;
  bool with_embeddings = false;
  std::size_t metrics_workers = 1;
  metrics->add_option("--manifest", metrics_manifest, "input manifest")
      ->required();
  metrics->add_option("--out", metrics_out, "output manifest")->required();
  metrics->add_flag("--with-embeddings", with_embeddings,
                    "read <image>.emb sidecars for CLIP-I");
  metrics->add_option("--workers", metrics_workers, "worker threads")
      ->check(CLI::PositiveNumber);

  // report
  auto* report = app.add_subcommand("report", "pass-rate summary");
  std::string report_manifest;
  bool report_json = false;
  report->add_option("--manifest", report_manifest, "filtered manifest")
      ->required();
  report->add_flag("--json", report_json, "emit JSON instead of text");

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "write a labeled synthetic corpus");
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_dims = "128x128", gen_counts;
  std::size_t gen_workers = 1;
  double gen_shift = 0.15;
  gen->add_option("--seed", gen_seed, "RNG seed")->required();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--dims", gen_dims, "image size WxH (>= 64x64)");
  gen->add_option("--counts", gen_counts,
                  "pairs per class: clean=N,misaligned=N,nomakeup=N,bgshift=N")
      ->required();
  gen->add_option("--workers", gen_workers, "worker threads")
      ->check(CLI::PositiveNumber);
  gen->add_option("--shift", gen_shift,
                  "misaligned-class mask shift as a fraction of face width");

  // inject-check
  auto* inject =
      app.add_subcommand("inject-check", "verify the reference injector");
  std::uint64_t inject_seed = 0;
  std::size_t inject_num_seeds = 20;
  inject->add_option("--seed", inject_seed, "first seed");
  inject->add_option("--num-seeds", inject_num_seeds,
                     "consecutive seeds to run")
      ->check(CLI::PositiveNumber);
  double inject_tolerance_scale = 1.0;
  inject->add_option("--tolerance-scale", inject_tolerance_scale,
                     "multiply every tolerance (testing hook)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*filter) {
      forge::PipelineConfig config;
      if (!filter_config.empty()) {
        config.filter = forge::load_filter_config(filter_config);
      }
      config.workers = filter_workers;
      config.out = filter_out;
      if (!filter_rejected.empty()) config.rejected = filter_rejected;
      const auto s = forge::run_filter_pipeline(filter_manifest, config);
      std::cerr << "filtered " << s.total << " pairs: " << s.passed
                << " passed, " << s.failed << " failed, " << s.errors
                << " errors\n";
    } else if (*metrics) {
      const auto s = forge::run_metrics(metrics_manifest, metrics_out,
                                        with_embeddings, metrics_workers);
      std::cout << forge::format_metrics_table(
          std::filesystem::path(metrics_manifest).stem().string(), s.metrics);
      if (s.missing_embeddings > 0) {
        std::cerr << "warning: " << s.missing_embeddings
                  << " pair(s) without .emb sidecars; clip_i omitted\n";
      }
      if (s.errors > 0) {
        std::cerr << "warning: " << s.errors << " pair(s) failed to load\n";
      }
    } else if (*report) {
      const auto rep =
          forge::build_report(forge::read_manifest(report_manifest));
      if (report_json) {
        std::cout << rep.json.dump(2) << "\n";
      } else {
        std::cout << rep.text;
      }
    } else if (*gen) {
      forge::CorpusSpec spec;
      spec.seed = gen_seed;
      spec.out_dir = gen_out;
      spec.dims = forge::parse_dims(gen_dims);
      spec.counts = forge::parse_corpus_counts(gen_counts);
      spec.workers = gen_workers;
      spec.misalignment_shift = gen_shift;
      const auto manifest = forge::gen_synthetic_corpus(spec);
      std::cout << manifest.string() << "\n";
    } else if (*inject) {
      return run_inject_check(inject_seed, inject_num_seeds,
                              inject_tolerance_scale);
    }
  } catch (const forge::Error& e) {
    std::cerr << "forge: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "forge: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
