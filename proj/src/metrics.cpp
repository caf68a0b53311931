// SPDX-License-Identifier: Apache-2.0
#include "forge/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "forge/error.hpp"
#include "forge/mask_algebra.hpp"

namespace forge {

namespace {

std::array<double, kSsimWindow> gaussian_kernel() {
  std::array<double, kSsimWindow> k{};
  const int half = kSsimWindow / 2;
  double sum = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - half;
    k[i] = std::exp(-(x * x) / (2 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable 'valid' Gaussian filter of a w x h plane.
std::vector<double> filter_valid(const std::vector<double>& plane,
                                 std::size_t w, std::size_t h,
                                 const std::array<double, kSsimWindow>& k) {
  const std::size_t ow = w - kSsimWindow + 1;
  const std::size_t oh = h - kSsimWindow + 1;
  std::vector<double> rows(ow * h);
  for (std::size_t y = 0; y < h; ++y) {
    const double* src = plane.data() + y * w;
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * src[x + i];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(ow * oh);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

void put_u32_le(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {char(v & 0xff), char((v >> 8) & 0xff),
                         char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32_le(const unsigned char* b) {
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
         std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace

std::vector<double> luminance(const ImageBuffer& image) {
  const auto data = image.data();
  const std::size_t n = image.width() * image.height();
  std::vector<double> y(n);
  if (image.channels() == 1) {
    for (std::size_t p = 0; p < n; ++p) y[p] = data[p];
  } else {
    for (std::size_t p = 0; p < n; ++p) {
      y[p] = 0.299 * data[3 * p] + 0.587 * data[3 * p + 1] +
             0.114 * data[3 * p + 2];
    }
  }
  return y;
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.dims() != b.dims()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "ssim: dimension mismatch " + to_string(a.dims()) + " vs " +
                    to_string(b.dims()));
  }
  if (a.channels() != b.channels()) {
    throw Error(ErrorKind::kChannelMismatch, "ssim: channel count mismatch");
  }
  const std::size_t w = a.width();
  const std::size_t h = a.height();
  if (w < kSsimWindow || h < kSsimWindow) {
    throw Error(ErrorKind::kInvalidArgument,
                "ssim: image " + to_string(a.dims()) +
                    " is smaller than the 11x11 window");
  }
  const auto x = luminance(a);
  const auto y = luminance(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto k = gaussian_kernel();
  const auto mu_x = filter_valid(x, w, h, k);
  const auto mu_y = filter_valid(y, w, h, k);
  const auto e_xx = filter_valid(xx, w, h, k);
  const auto e_yy = filter_valid(yy, w, h, k);
  const auto e_xy = filter_valid(xy, w, h, k);

  const double c1 = (kSsimK1 * kSsimRange) * (kSsimK1 * kSsimRange);
  const double c2 = (kSsimK2 * kSsimRange) * (kSsimK2 * kSsimRange);
  double sum = 0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i];
    const double my = mu_y[i];
    const double var_x = e_xx[i] - mx * mx;
    const double var_y = e_yy[i] - my * my;
    const double cov = e_xy[i] - mx * my;
    sum += ((2 * mx * my + c1) * (2 * cov + c2)) /
           ((mx * mx + my * my + c1) * (var_x + var_y + c2));
  }
  return sum / static_cast<double>(mu_x.size());
}

double l2m(const ImageBuffer& source, const ImageBuffer& generated,
           const BinaryMask& face_mask) {
  require_conformable(source, generated, face_mask);
  const auto m = face_mask.values();
  const auto da = source.data();
  const auto db = generated.data();
  const std::size_t channels = source.channels();
  std::int64_t sum = 0;
  std::int64_t count = 0;
  for (std::size_t p = 0; p < m.size(); ++p) {
    if (m[p]) continue;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::int64_t d =
          std::int64_t(da[p * channels + c]) - db[p * channels + c];
      sum += d * d;
    }
    count += static_cast<std::int64_t>(channels);
  }
  if (count == 0) {
    throw Error(ErrorKind::kEmptyRegion, "l2m: no background region");
  }
  return static_cast<double>(sum) / static_cast<double>(count);
}

double clip_i(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "clip_i: embedding dims " + std::to_string(a.dim()) + " vs " +
                    std::to_string(b.dim()));
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double x = a.values[i];
    const double y = b.values[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0 || nb == 0) {
    throw Error(ErrorKind::kInvalidArgument, "clip_i: zero embedding vector");
  }
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

EmbeddingVector read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, path.string() + ": cannot open");
  unsigned char header[8];
  if (!in.read(reinterpret_cast<char*>(header), 8)) {
    throw Error(ErrorKind::kDecode, path.string() + ": truncated EMB1 header");
  }
  if (std::memcmp(header, "EMB1", 4) != 0) {
    throw Error(ErrorKind::kDecode, path.string() + ": bad magic, want EMB1");
  }
  const std::uint32_t dim = get_u32_le(header + 4);
  if (dim == 0) {
    throw Error(ErrorKind::kDecode, path.string() + ": zero dimension");
  }
  std::vector<unsigned char> payload(std::size_t(dim) * 4);
  if (!in.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(payload.size()))) {
    throw Error(ErrorKind::kDecode, path.string() + ": truncated payload");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::kDecode,
                path.string() + ": trailing bytes after payload");
  }
  EmbeddingVector e;
  e.values.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    e.values[i] = std::bit_cast<float>(get_u32_le(payload.data() + 4 * i));
  }
  return e;
}

void write_embedding(const EmbeddingVector& embedding,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, path.string() + ": cannot open");
  out.write("EMB1", 4);
  put_u32_le(out, static_cast<std::uint32_t>(embedding.dim()));
  for (float v : embedding.values) put_u32_le(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw Error(ErrorKind::kIo, path.string() + ": write failed");
}

double PassRateSummary::pass_rate() const {
  if (valid() <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "pass rate: no valid records");
  }
  return static_cast<double>(passed) / static_cast<double>(valid());
}

std::optional<double> PassRateSummary::manual_pass_rate() const {
  if (manual_labeled == 0) return std::nullopt;
  return static_cast<double>(manual_passed) /
         static_cast<double>(manual_labeled);
}

PassRateSummary& PassRateSummary::operator+=(const PassRateSummary& o) {
  total += o.total;
  errors += o.errors;
  passed += o.passed;
  for (std::size_t i = 0; i < rejections.size(); ++i) {
    rejections[i] += o.rejections[i];
  }
  manual_labeled += o.manual_labeled;
  manual_passed += o.manual_passed;
  return *this;
}

void accumulate(PassRateSummary& s, const PairRecord& r) {
  ++s.total;
  if (auto it = r.extra.find("manual_label"); it != r.extra.end()) {
    const bool ok = it->is_boolean() ? it->get<bool>()
                                     : (it->is_string() && *it == "pass");
    ++s.manual_labeled;
    s.manual_passed += ok;
  }
  if (r.error) {
    ++s.errors;
    return;
  }
  if (r.verdicts.empty()) {
    throw Error(ErrorKind::kManifest,
                "record '" + r.id + "' carries no verdicts");
  }
  bool all = true;
  for (const auto& v : r.verdicts) {
    if (v.passed) continue;
    all = false;
    ++s.rejections[static_cast<std::size_t>(v.filter_name)];
  }
  s.passed += all;
}

PassRateSummary pass_rate(const std::vector<PairRecord>& records) {
  if (records.empty()) {
    throw Error(ErrorKind::kManifest, "pass rate: empty manifest");
  }
  PassRateSummary s;
  for (const auto& r : records) accumulate(s, r);
  return s;
}

std::optional<double> MetricsSummary::mean_clip_i() const {
  if (clip_count == 0) return std::nullopt;
  return clip_sum / static_cast<double>(clip_count);
}

std::optional<double> MetricsSummary::mean_ssim() const {
  if (count == 0) return std::nullopt;
  return ssim_sum / static_cast<double>(count);
}

std::optional<double> MetricsSummary::mean_l2m() const {
  if (count == 0) return std::nullopt;
  return l2m_sum / static_cast<double>(count);
}

MetricsSummary& MetricsSummary::operator+=(const MetricsSummary& o) {
  count += o.count;
  clip_count += o.clip_count;
  ssim_sum += o.ssim_sum;
  l2m_sum += o.l2m_sum;
  clip_sum += o.clip_sum;
  return *this;
}

void accumulate(MetricsSummary& s, const MetricsRow& row) {
  ++s.count;
  s.ssim_sum += row.ssim;
  s.l2m_sum += row.l2m;
  if (row.clip_i) {
    ++s.clip_count;
    s.clip_sum += *row.clip_i;
  }
}

}  // namespace forge
