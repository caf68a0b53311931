// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <fstream>
#include <iterator>
#include <sstream>

#include "forge/error.hpp"
#include "forge/filters.hpp"
#include "forge/pipeline.hpp"
#include "test_support.hpp"

using namespace forge;
using namespace forge::testing;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

CorpusSpec spec_for(const fs::path& dir, std::size_t per_class,
                    std::uint64_t seed = 42) {
  CorpusSpec spec;
  spec.seed = seed;
  spec.out_dir = dir;
  for (auto c : {DefectClass::kClean, DefectClass::kMisaligned,
                 DefectClass::kNoMakeup, DefectClass::kBackgroundShift}) {
    spec.counts[c] = per_class;
  }
  return spec;
}

PairRecord judged(std::string id, bool ok) {
  PairRecord r;
  r.id = std::move(id);
  FilterVerdict a, b, c;
  a.filter_name = FilterName::kMisalignment;
  b.filter_name = FilterName::kMakeupFailed;
  c.filter_name = FilterName::kBackground;
  a.passed = ok;
  b.passed = c.passed = true;
  r.verdicts = {a, b, c};
  r.passed = ok;
  return r;
}

}  // namespace

TEST_CASE("parallel_for visits every index exactly once", "[pipeline]") {
  for (std::size_t workers : {1u, 3u, 8u, 64u}) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL("called on empty range"); });
}

TEST_CASE("empty manifest gives empty output and a 0 pairs report", "[pipeline]") {
  TempDir dir("pipe");
  std::ofstream(dir / "empty.jsonl").close();
  PipelineConfig cfg;
  cfg.out = dir / "out.jsonl";
  const auto s = run_filter_pipeline(dir / "empty.jsonl", cfg);
  CHECK(s.total == 0);
  CHECK(fs::file_size(cfg.out) == 0);
  const auto rep = build_report(read_manifest(cfg.out));
  CHECK(rep.text == "0 pairs\n");
  CHECK(rep.json["pairs"] == 0);
}

TEST_CASE("40-pair corpus passes exactly the 10 clean pairs", "[pipeline]") {
  TempDir dir("pipe");
  const auto manifest = gen_synthetic_corpus(spec_for(dir.path(), 10));
  PipelineConfig cfg;
  cfg.out = dir / "out.jsonl";
  cfg.rejected = dir / "rejected.jsonl";
  const auto s = run_filter_pipeline(manifest, cfg);
  CHECK(s.total == 40);
  CHECK(s.passed == 10);
  CHECK(s.failed == 30);
  CHECK(s.errors == 0);

  const auto out = read_manifest(cfg.out);
  for (const auto& r : out) {
    const std::string label = r.extra.at("label");
    REQUIRE(r.verdicts.size() == 3);
    for (std::size_t f = 0; f < 3; ++f) {
      INFO(r.id << " " << r.verdicts[f].reason);
      const auto cls = label == "clean"        ? DefectClass::kClean
                       : label == "misaligned" ? DefectClass::kMisaligned
                       : label == "nomakeup"   ? DefectClass::kNoMakeup
                                               : DefectClass::kBackgroundShift;
      CHECK(r.verdicts[f].passed == expected_passes(cls)[f]);
    }
    CHECK(*r.passed == (label == "clean"));
  }
  const auto rejected = read_manifest(*cfg.rejected);
  CHECK(rejected.size() == 30);
  for (const auto& r : rejected) CHECK_FALSE(*r.passed);
}

TEST_CASE("workers 1 and 8 write byte-identical manifests", "[pipeline]") {
  TempDir dir("pipe");
  const auto manifest = gen_synthetic_corpus(spec_for(dir.path(), 10, 3));
  PipelineConfig one, eight;
  one.out = dir / "w1.jsonl";
  eight.out = dir / "w8.jsonl";
  eight.workers = 8;
  run_filter_pipeline(manifest, one);
  run_filter_pipeline(manifest, eight);
  CHECK(slurp(one.out) == slurp(eight.out));
  CHECK(!slurp(one.out).empty());
}

TEST_CASE("per-record failures become error records", "[pipeline]") {
  TempDir dir("pipe");
  const auto manifest = gen_synthetic_corpus(spec_for(dir.path(), 1));
  auto records = read_manifest(manifest);
  records[1].generated_path = dir / "images/missing.png";
  records[2].source_masks.face = fixtures() / "edge/mask_512.png";
  write_manifest(dir / "broken.jsonl", records);

  PipelineConfig cfg;
  cfg.out = dir / "out.jsonl";
  cfg.rejected = dir / "rej.jsonl";
  cfg.workers = 3;
  const auto s = run_filter_pipeline(dir / "broken.jsonl", cfg);
  CHECK(s.errors == 2);
  CHECK(s.total == 4);
  const auto out = read_manifest(cfg.out);
  REQUIRE(out[1].error);
  CHECK_THAT(*out[1].error, ContainsSubstring("missing.png"));
  CHECK(out[1].verdicts.empty());
  CHECK_FALSE(out[1].passed);
  REQUIRE(out[2].error);
  CHECK_THAT(*out[2].error, ContainsSubstring("512x512"));
  for (const auto& r : read_manifest(*cfg.rejected)) CHECK_FALSE(r.error);
}

TEST_CASE("unreadable manifest aborts with a manifest error", "[pipeline]") {
  TempDir dir("pipe");
  PipelineConfig cfg;
  cfg.out = dir / "out.jsonl";
  try {
    run_filter_pipeline(dir / "none.jsonl", cfg);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kManifest);
  }
  CHECK_FALSE(fs::exists(cfg.out));
}

TEST_CASE("manifest parsing errors carry line numbers", "[pipeline]") {
  TempDir dir("pipe");
  const auto good = lines_of(fixtures() / "corpus/manifest.jsonl");
  auto write = [&](const std::vector<std::string>& lines) {
    std::ofstream out(dir / "m.jsonl");
    for (const auto& l : lines) out << l << "\n";
  };
  auto expect_error = [&](const std::string& needle) {
    try {
      read_manifest(dir / "m.jsonl");
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kManifest);
      CHECK_THAT(e.what(), ContainsSubstring(needle));
    }
  };
  write({good[0], "{broken"});
  expect_error("m.jsonl:2");
  write({good[0], good[0]});
  expect_error("duplicate id");
  write({R"({"id":"x","source_path":"a.png"})"});
  expect_error("generated_path");
  write({"[1,2]"});
  expect_error("not a JSON object");
  write({"", good[0], "   ", good[1], ""});
  CHECK(read_manifest(dir / "m.jsonl").size() == 2);
}

TEST_CASE("manifest paths resolve against the manifest and are rewritten", "[pipeline]") {
  TempDir dir("pipe");
  fs::create_directories(dir / "a/b");
  fs::create_directories(dir / "c");
  {
    std::ofstream(dir / "a/b/m.jsonl")
        << R"({"id":"p","source_path":"../img/s.png","generated_path":"/abs/g.png",)"
        << R"("prompt_tag":"red","source_face":"f.png","source_eyes":"e.png",)"
        << R"("source_teeth":"t.png","source_contour":"c.png","generated_face":"gf.png",)"
        << R"("generated_eyes":"ge.png","generated_teeth":"gt.png",)"
        << R"("generated_contour":"gc.png","manual_label":true,"note":{"k":1}})"
        << "\n";
  }
  const auto records = read_manifest(dir / "a/b/m.jsonl");
  REQUIRE(records.size() == 1);
  const auto& r = records[0];
  CHECK(r.source_path == (dir.path() / "a/img/s.png").lexically_normal());
  CHECK(r.generated_path == "/abs/g.png");
  CHECK(r.source_masks.face == (dir.path() / "a/b/f.png").lexically_normal());
  CHECK(r.extra.at("manual_label") == true);
  CHECK(r.extra.at("note").at("k") == 1);

  write_manifest(dir / "c/out.jsonl", records);
  const auto j = nlohmann::ordered_json::parse(lines_of(dir / "c/out.jsonl").at(0));
  CHECK(j["source_path"] == "../a/img/s.png");
  CHECK(j["source_face"] == "../a/b/f.png");
  CHECK(j["note"]["k"] == 1);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys.front() == "id");
  CHECK(read_manifest(dir / "c/out.jsonl")[0].source_path == r.source_path);
}

TEST_CASE("verdicts and metrics round-trip through the manifest", "[pipeline]") {
  TempDir dir("pipe");
  auto r = judged("v", false);
  r.source_path = dir / "s.png";
  r.generated_path = dir / "g.png";
  r.source_masks = r.generated_masks = {dir / "f", dir / "e", dir / "t", dir / "c"};
  r.verdicts[0].statistic = 0.3125;
  r.verdicts[0].threshold_used = 0.1;
  r.verdicts[0].reason = "misaligned region face";
  r.metrics = MetricsRow{std::nullopt, 0.875, 4.5};
  r.reference_path = dir / "ref.png";
  write_manifest(dir / "m.jsonl", {r});
  const auto back = read_manifest(dir / "m.jsonl").at(0);
  CHECK(back.verdicts == r.verdicts);
  CHECK(*back.passed == false);
  CHECK(back.metrics->ssim == 0.875);
  CHECK_FALSE(back.metrics->clip_i);
  CHECK(*back.reference_path == dir.path() / "ref.png");
  CHECK_THAT(lines_of(dir / "m.jsonl")[0],
             ContainsSubstring(R"("filter_name":"misalignment","passed":false)"));
}

TEST_CASE("metrics on the fixture corpus match per-record oracles", "[pipeline]") {
  TempDir dir("pipe");
  MetricsRunSummary s;
  const auto records = read_manifest(fixtures() / "corpus/manifest.jsonl");
  const auto out = measure_records(records, true, 2, s);
  REQUIRE(out.size() == 4);
  CHECK(s.errors == 0);
  CHECK(s.missing_embeddings == 0);

  double ssim_sum = 0, l2m_sum = 0, clip_sum = 0;
  for (const auto& r : out) {
    const auto a = load_image(r.source_path);
    const auto b = load_image(r.generated_path);
    const auto face = load_mask(r.source_masks.face, a.dims());
    const double o_ssim = oracle_ssim(a, b);
    const double o_l2m = oracle_l2m(a, b, face);
    const auto ea = read_embedding(embedding_path_for(r.source_path));
    const auto eb = read_embedding(embedding_path_for(r.generated_path));
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < ea.dim(); ++i) {
      dot += double(ea.values[i]) * eb.values[i];
      na += double(ea.values[i]) * ea.values[i];
      nb += double(eb.values[i]) * eb.values[i];
    }
    const double o_clip = dot / (std::sqrt(na) * std::sqrt(nb));
    REQUIRE(r.metrics);
    CHECK(r.metrics->ssim == Catch::Approx(o_ssim).epsilon(1e-9));
    CHECK(r.metrics->l2m == Catch::Approx(o_l2m).epsilon(1e-12));
    CHECK(*r.metrics->clip_i == Catch::Approx(o_clip).epsilon(1e-9));
    ssim_sum += o_ssim;
    l2m_sum += o_l2m;
    clip_sum += o_clip;
  }
  CHECK(std::abs(*s.metrics.mean_ssim() - ssim_sum / 4) < 1e-9);
  CHECK(std::abs(*s.metrics.mean_l2m() - l2m_sum / 4) < 1e-9);
  CHECK(std::abs(*s.metrics.mean_clip_i() - clip_sum / 4) < 1e-9);

  // The no-makeup pair is an identical image pair.
  const auto& same = out[2];
  REQUIRE(same.extra.at("label") == "nomakeup");
  CHECK(same.metrics->ssim == 1.0);
  CHECK(same.metrics->l2m == 0.0);
}

TEST_CASE("metrics without embeddings leave clip_i absent", "[pipeline]") {
  TempDir dir("pipe");
  const auto manifest = gen_synthetic_corpus(spec_for(dir.path(), 1));
  const auto s = run_metrics(manifest, dir / "m.jsonl", true, 1);
  CHECK(s.missing_embeddings == 4);
  CHECK_FALSE(s.metrics.mean_clip_i());
  for (const auto& r : read_manifest(dir / "m.jsonl")) {
    REQUIRE(r.metrics);
    CHECK_FALSE(r.metrics->clip_i);
  }
  const auto table = format_metrics_table("synthetic", s.metrics);
  CHECK_THAT(table, ContainsSubstring("CLIP-I"));
  CHECK_THAT(table, ContainsSubstring("synthetic"));
  CHECK_THAT(table, ContainsSubstring(" -"));
}

TEST_CASE("reference_path switches the CLIP-I partner", "[pipeline]") {
  TempDir dir("pipe");
  auto records = read_manifest(fixtures() / "corpus/manifest.jsonl");
  auto& r = records[0];
  const auto gen_emb = read_embedding(embedding_path_for(r.generated_path));
  r.reference_path = dir / "ref.png";
  write_embedding(gen_emb, embedding_path_for(*r.reference_path));
  MetricsRunSummary s;
  const auto out = measure_records({r}, true, 1, s);
  CHECK(*out[0].metrics->clip_i == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("report formatting", "[pipeline]") {
  std::vector<PairRecord> records;
  for (int i = 0; i < 500; ++i) records.push_back(judged("r" + std::to_string(i), i < 34));
  auto rep = build_report(records);
  CHECK(pass_rate_percent(rep.pass) == 6.8);
  CHECK_THAT(rep.text, ContainsSubstring("PR: 6.8%"));
  CHECK_THAT(rep.text, ContainsSubstring("500 pairs (valid 500, errors 0)"));
  CHECK_THAT(rep.text, ContainsSubstring("misalignment=466"));
  CHECK(rep.json["rejections"]["misalignment"] == 466);
  CHECK(rep.json["pass_rate_percent"] == 6.8);

  std::vector<PairRecord> all_pass(7, judged("x", true));
  CHECK_THAT(build_report(all_pass).text, ContainsSubstring("PR: 100.0%"));
}

TEST_CASE("report counts errors separately from failures", "[pipeline]") {
  std::vector<PairRecord> records;
  for (int i = 0; i < 8; ++i) records.push_back(judged("r" + std::to_string(i), i < 6));
  for (int i = 0; i < 2; ++i) {
    PairRecord e;
    e.id = "e" + std::to_string(i);
    e.error = "boom";
    records.push_back(e);
  }
  records[0].extra["manual_label"] = "pass";
  const auto rep = build_report(records);
  CHECK(rep.pass.valid() == 8);
  CHECK(rep.pass.pass_rate() == 0.75);
  CHECK_THAT(rep.text, ContainsSubstring("10 pairs (valid 8, errors 2)"));
  CHECK_THAT(rep.text, ContainsSubstring("PR: 75.0%"));
  CHECK_THAT(rep.text, ContainsSubstring("manual PR: 100.0% (1 labeled)"));
  CHECK(rep.json["errors"] == 2);

  std::vector<PairRecord> only_errors(records.end() - 2, records.end());
  const auto none = build_report(only_errors);
  CHECK_THAT(none.text, ContainsSubstring("PR: n/a"));
  CHECK(none.json["pass_rate"].is_null());
}

TEST_CASE("corpus generation is deterministic and class-faithful", "[pipeline]") {
  TempDir a("pipe"), b("pipe");
  auto spec_a = spec_for(a.path(), 3, 99);
  auto spec_b = spec_for(b.path(), 3, 99);
  spec_b.workers = 4;
  gen_synthetic_corpus(spec_a);
  gen_synthetic_corpus(spec_b);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a.path());
    CHECK(slurp(entry.path()) == slurp(b.path() / rel));
    ++files;
  }
  CHECK(files == 12 * 10 + 1);

  for (const auto& r : read_manifest(a / "manifest.jsonl")) {
    if (r.extra.at("label") == "nomakeup") {
      CHECK(slurp(r.source_path) == slurp(r.generated_path));
    }
    if (r.extra.at("label") == "misaligned") {
      const auto res = load_pair_resources(r);
      CHECK_FALSE(misalignment_filter(res.source_masks, res.generated_masks,
                                      FilterConfig{})
                      .passed);
    }
  }
}

TEST_CASE("different seeds give different corpora", "[pipeline]") {
  TempDir a("pipe"), b("pipe");
  gen_synthetic_corpus(spec_for(a.path(), 1, 1));
  gen_synthetic_corpus(spec_for(b.path(), 1, 2));
  CHECK(slurp(a / "images/clean_00000.src.png") !=
        slurp(b / "images/clean_00000.src.png"));
}

TEST_CASE("corpus argument parsing", "[pipeline]") {
  const auto counts = parse_corpus_counts("clean=3,bgshift=2");
  CHECK(counts.at(DefectClass::kClean) == 3);
  CHECK(counts.at(DefectClass::kBackgroundShift) == 2);
  CHECK(counts.count(DefectClass::kMisaligned) == 0);
  CHECK_THROWS_AS(parse_corpus_counts("purple=3"), Error);
  CHECK_THROWS_AS(parse_corpus_counts("clean=x"), Error);
  CHECK(parse_dims("128x96") == Dims{128, 96});
  CHECK_THROWS_AS(parse_dims("128"), Error);
  CHECK_THROWS_AS(parse_dims("0x5"), Error);

  TempDir dir("pipe");
  auto small = spec_for(dir.path(), 1);
  small.dims = {32, 32};
  CHECK_THROWS_AS(gen_synthetic_corpus(small), Error);
}
