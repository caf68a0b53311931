// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <fstream>

#include "forge/error.hpp"
#include "forge/manifest.hpp"
#include "forge/metrics.hpp"
#include "test_support.hpp"

using namespace forge;
using namespace forge::testing;

namespace {

FilterVerdict verdict(FilterName f, bool ok) {
  FilterVerdict v;
  v.filter_name = f;
  v.passed = ok;
  return v;
}

PairRecord judged(bool mis, bool makeup, bool bg) {
  PairRecord r;
  r.verdicts = {verdict(FilterName::kMisalignment, mis),
                verdict(FilterName::kMakeupFailed, makeup),
                verdict(FilterName::kBackground, bg)};
  r.passed = mis && makeup && bg;
  return r;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

}  // namespace

TEST_CASE("ssim of an image with itself is exactly 1", "[metrics]") {
  Rng rng(12);
  for (std::size_t ch : {1u, 3u}) {
    const auto a = random_image(rng, 32, 32, ch);
    CHECK(ssim(a, a) == 1.0);
  }
}

TEST_CASE("ssim of constant 0 against constant 255", "[metrics]") {
  // Zero variances: SSIM = (2*0*255 + C1) C2 / ((0 + 255^2 + C1) C2).
  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double expected = c1 / (255.0 * 255.0 + c1);
  const auto black = constant_image(16, 16, 3, 0);
  const auto white = constant_image(16, 16, 3, 255);
  CHECK(ssim(black, white) == Catch::Approx(expected).epsilon(1e-12));
  CHECK(oracle_ssim(black, white) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ssim matches the per-window oracle", "[metrics]") {
  Rng rng(2025);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t ch = trial % 2 ? 3 : 1;
    const auto a = random_image(rng, 32, 32, ch);
    auto b = a;
    for (auto& v : b.data()) {
      v = static_cast<std::uint8_t>(
          std::clamp<std::int64_t>(v + rng.uniform_int(-40, 40), 0, 255));
    }
    const double got = ssim(a, b);
    CHECK(rel_err(got, oracle_ssim(a, b)) < 1e-6);
    CHECK(got == Catch::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(got >= -1.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("ssim works on non-square images", "[metrics]") {
  Rng rng(5);
  const auto a = random_image(rng, 23, 14, 3);
  const auto b = random_image(rng, 23, 14, 3);
  CHECK(rel_err(ssim(a, b), oracle_ssim(a, b)) < 1e-6);
}

TEST_CASE("ssim errors", "[metrics]") {
  const auto a = constant_image(16, 16, 1, 0);
  CHECK_THROWS_AS(ssim(a, constant_image(16, 15, 1, 0)), Error);
  CHECK_THROWS_AS(ssim(constant_image(10, 16, 1, 0), constant_image(10, 16, 1, 0)),
                  Error);
  CHECK_THROWS_AS(ssim(a, constant_image(16, 16, 3, 0)), Error);
}

TEST_CASE("luminance uses Rec.601 weights", "[metrics]") {
  ImageBuffer px(1, 1, 3, {200, 100, 50});
  CHECK(luminance(px)[0] == Catch::Approx(0.299 * 200 + 0.587 * 100 + 0.114 * 50));
  CHECK(luminance(constant_image(1, 1, 1, 77))[0] == 77);
}

TEST_CASE("l2m examples", "[metrics]") {
  Rng rng(3);
  const auto src = random_image(rng, 16, 16, 3);
  const auto face = rect_mask({16, 16}, 4, 4, 12, 12);
  CHECK(l2m(src, src, face) == 0.0);

  auto shifted = src;
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 16; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        auto& v = shifted.at(x, y, c);
        v = static_cast<std::uint8_t>(v >= 3 ? v - 3 : v + 3);
      }
    }
  }
  CHECK(l2m(src, shifted, face) == 9.0);
}

TEST_CASE("l2m on a hand-listed 4x4 pair", "[metrics]") {
  // Face is the centre 2x2; 12 background pixels, one channel.
  const auto src = constant_image(4, 4, 1, 100);
  auto gen = src;
  gen.at(0, 0, 0) = 104;  // +4 -> 16
  gen.at(3, 0, 0) = 97;   // -3 -> 9
  gen.at(1, 3, 0) = 101;  // +1 -> 1
  gen.at(1, 1, 0) = 0;    // face, ignored
  const auto face = rect_mask({4, 4}, 1, 1, 3, 3);
  CHECK(l2m(src, gen, face) == 26.0 / 12.0);
  CHECK(l2m(src, gen, face) == oracle_l2m(src, gen, face));
}

TEST_CASE("l2m matches oracle and ignores the face", "[metrics]") {
  Rng rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const auto w = static_cast<std::size_t>(rng.uniform_int(2, 24));
    const auto h = static_cast<std::size_t>(rng.uniform_int(2, 24));
    const std::size_t ch = trial % 2 ? 3 : 1;
    const auto a = random_image(rng, w, h, ch);
    auto b = random_image(rng, w, h, ch);
    auto face = random_mask(rng, {w, h}, 0.5);
    face.set(0, 0, false);
    const double base = l2m(a, b, face);
    CHECK(base == Catch::Approx(oracle_l2m(a, b, face)).epsilon(1e-12));
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (!face.at(x, y)) continue;
        for (std::size_t c = 0; c < ch; ++c) {
          b.at(x, y, c) = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        }
      }
    }
    CHECK(l2m(a, b, face) == base);
  }
}

TEST_CASE("l2m errors", "[metrics]") {
  const auto a = constant_image(4, 4, 3, 0);
  CHECK_THROWS_AS(l2m(a, a, BinaryMask({4, 4}, 1)), Error);
  CHECK_THROWS_AS(l2m(a, constant_image(4, 4, 1, 0), BinaryMask({4, 4})), Error);
}

TEST_CASE("clip_i examples", "[metrics]") {
  CHECK(clip_i({{1, 2, 2}}, {{1, 2, 2}}) == 1.0);
  CHECK(clip_i({{1, 0}}, {{0, 1}}) == 0.0);
  CHECK(clip_i({{1, 2, 2}}, {{2, 1, 2}}) == Catch::Approx(8.0 / 9.0).epsilon(1e-15));
  CHECK(clip_i({{1, 2, 2}}, {{-1, -2, -2}}) == -1.0);
  CHECK_THROWS_AS(clip_i({{0, 0}}, {{1, 0}}), Error);
  CHECK_THROWS_AS(clip_i({{1, 0}}, {{1, 0, 0}}), Error);
}

TEST_CASE("clip_i of random vectors with themselves", "[metrics]") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    EmbeddingVector e;
    for (int i = 0; i < 512; ++i) e.values.push_back(float(rng.uniform(-1, 1)));
    CHECK(std::abs(clip_i(e, e) - 1.0) < 1e-12);
  }
}

TEST_CASE("EMB1 round-trip and byte layout", "[metrics]") {
  TempDir dir("metrics");
  const EmbeddingVector e{{1.5f, -2.0f, 0.25f}};
  write_embedding(e, dir / "e.emb");
  std::ifstream in(dir / "e.emb", std::ios::binary);
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), {}};
  REQUIRE(bytes.size() == 8 + 12);
  CHECK(std::memcmp(bytes.data(), "EMB1", 4) == 0);
  CHECK(bytes[4] == 3);
  CHECK(bytes[5] == 0);
  // 1.5f = 0x3FC00000, little-endian.
  CHECK(bytes[8] == 0x00);
  CHECK(bytes[10] == 0xC0);
  CHECK(bytes[11] == 0x3F);
  CHECK(read_embedding(dir / "e.emb").values == e.values);
}

TEST_CASE("EMB1 fixtures", "[metrics]") {
  const auto unit = read_embedding(fixtures() / "edge/unit.emb");
  CHECK(unit.values == std::vector<float>{1, 2, 2});
  for (const char* bad : {"bad_magic.emb", "short.emb", "zero_dim.emb"}) {
    try {
      read_embedding(fixtures() / "edge" / bad);
      FAIL(bad);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kDecode);
    }
  }
  CHECK_THROWS_AS(read_embedding(fixtures() / "edge/none.emb"), Error);

  TempDir dir("metrics");
  write_embedding(unit, dir / "t.emb");
  std::ofstream(dir / "t.emb", std::ios::app | std::ios::binary) << 'x';
  CHECK_THROWS_AS(read_embedding(dir / "t.emb"), Error);
}

TEST_CASE("corpus embedding sidecars parse and self-match", "[metrics]") {
  for (const auto& r : read_manifest(fixtures() / "corpus/manifest.jsonl")) {
    const auto e = read_embedding(embedding_path_for(r.source_path));
    CHECK(e.dim() == 16);
    CHECK(std::abs(clip_i(e, e) - 1.0) < 1e-5);
  }
}

TEST_CASE("pass rate enumeration", "[metrics]") {
  const std::vector<PairRecord> records = {
      judged(false, true, true), judged(false, true, false), judged(true, true, true)};
  const auto s = pass_rate(records);
  CHECK(s.total == 3);
  CHECK(s.passed == 1);
  CHECK(s.pass_rate() == 1.0 / 3.0);
  CHECK(s.rejections[0] == 2);
  CHECK(s.rejections[1] == 0);
  CHECK(s.rejections[2] == 1);

  CHECK(pass_rate({judged(true, true, true), judged(true, true, true)}).pass_rate() ==
        1.0);
}

TEST_CASE("962 of 1000 passing gives 0.962", "[metrics]") {
  std::vector<PairRecord> records;
  for (int i = 0; i < 1000; ++i) records.push_back(judged(i >= 38, true, true));
  CHECK(pass_rate(records).pass_rate() == 0.962);
}

TEST_CASE("pass rate excludes errors and tracks manual labels", "[metrics]") {
  std::vector<PairRecord> records;
  for (int i = 0; i < 8; ++i) records.push_back(judged(i < 6, true, true));
  PairRecord broken;
  broken.error = "decode error";
  records.push_back(broken);
  records.push_back(broken);
  records[0].extra["manual_label"] = true;
  records[1].extra["manual_label"] = "fail";
  records[7].extra["manual_label"] = "pass";
  const auto s = pass_rate(records);
  CHECK(s.total == 10);
  CHECK(s.errors == 2);
  CHECK(s.valid() == 8);
  CHECK(s.pass_rate() == 6.0 / 8.0);
  CHECK(s.manual_labeled == 3);
  CHECK(*s.manual_pass_rate() == 2.0 / 3.0);

  CHECK_THROWS_AS(pass_rate({}), Error);
  CHECK_THROWS_AS(pass_rate({PairRecord{}}), Error);
  PassRateSummary only_errors;
  accumulate(only_errors, broken);
  CHECK_THROWS_AS(only_errors.pass_rate(), Error);
}

TEST_CASE("summaries merge like a single pass", "[metrics]") {
  std::vector<PairRecord> records;
  Rng rng(1);
  for (int i = 0; i < 40; ++i) {
    records.push_back(judged(rng.unit() < 0.7, rng.unit() < 0.7, rng.unit() < 0.7));
  }
  PassRateSummary left, right;
  for (int i = 0; i < 40; ++i) accumulate(i < 17 ? left : right, records[i]);
  left += right;
  const auto whole = pass_rate(records);
  CHECK(left.passed == whole.passed);
  CHECK(left.rejections == whole.rejections);

  MetricsSummary m;
  accumulate(m, MetricsRow{0.5, 0.9, 2.0});
  accumulate(m, MetricsRow{std::nullopt, 0.7, 4.0});
  CHECK(*m.mean_ssim() == Catch::Approx(0.8));
  CHECK(*m.mean_l2m() == 3.0);
  CHECK(*m.mean_clip_i() == 0.5);
  CHECK_FALSE(MetricsSummary{}.mean_ssim());
}
