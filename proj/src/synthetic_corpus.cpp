// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "forge/error.hpp"
#include "forge/image.hpp"
#include "forge/pipeline.hpp"
#include "forge/rng.hpp"

namespace forge {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPromptTags[] = {"smoky",  "colorful", "natural",
                                       "glam",   "gothic",   "peach",
                                       "bronze", "rosy"};

struct Rgb {
  int r, g, b;
};

std::uint8_t clamp8(int v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

void put(ImageBuffer& img, std::size_t x, std::size_t y, Rgb c) {
  img.at(x, y, 0) = clamp8(c.r);
  img.at(x, y, 1) = clamp8(c.g);
  img.at(x, y, 2) = clamp8(c.b);
}

// Face geometry; all feature placement derives from it.
struct FaceLayout {
  double cx, cy;  // centre
  double a, b;    // horizontal / vertical semi-axes
  bool mouth_open;

  // Normalized ellipse radius squared; <= 1 inside the face.
  double face_r2(double x, double y) const {
    const double u = (x - cx) / a;
    const double v = (y - cy) / b;
    return u * u + v * v;
  }
  bool in_face(double x, double y) const { return face_r2(x, y) <= 1.0; }
  bool in_contour(double x, double y) const {
    const double r2 = face_r2(x, y);
    return r2 <= 1.0 && r2 >= 0.81;
  }
  bool in_eyes(double x, double y) const {
    const double ey = cy - 0.25 * b;
    const double ra = 0.18 * a;
    const double rb = 0.08 * b;
    for (double ex : {cx - 0.4 * a, cx + 0.4 * a}) {
      const double u = (x - ex) / ra;
      const double v = (y - ey) / rb;
      if (u * u + v * v <= 1.0) return true;
    }
    return false;
  }
  bool in_teeth(double x, double y) const {
    if (!mouth_open) return false;
    return std::abs(x - cx) <= 0.25 * a &&
           std::abs(y - (cy + 0.5 * b)) <= 0.06 * b;
  }
  bool in_lips(double x, double y) const {
    return std::abs(x - cx) <= 0.32 * a &&
           std::abs(y - (cy + 0.5 * b)) <= 0.10 * b;
  }

  FaceLayout shifted(double dx) const {
    FaceLayout f = *this;
    f.cx += dx;
    return f;
  }
};

struct Palette {
  Rgb bg0, bg1;
  Rgb skin;
  double stripe_period;
};

Rgb background_at(const Palette& p, Dims dims, std::size_t x, std::size_t y) {
  const double t = double(x + y) / double(dims.width + dims.height);
  const double stripe =
      12.0 * std::sin(2.0 * M_PI * double(x) / p.stripe_period);
  auto mix = [&](int a, int b) {
    return static_cast<int>(std::lround(a + (b - a) * t + stripe));
  };
  return {mix(p.bg0.r, p.bg1.r), mix(p.bg0.g, p.bg1.g), mix(p.bg0.b, p.bg1.b)};
}

// Face colour at (x, y); `made_up` applies the recolor that stands in for a
// makeup edit (every channel moves by at least 25).
Rgb face_at(const FaceLayout& f, const Palette& p, double x, double y,
            bool made_up) {
  Rgb c;
  if (f.in_eyes(x, y)) {
    c = {45, 40, 50};
  } else if (f.in_teeth(x, y)) {
    c = {225, 222, 210};
  } else if (f.in_lips(x, y)) {
    c = {150, 70, 80};
  } else {
    const int shade = static_cast<int>(std::lround(18.0 * f.face_r2(x, y)));
    c = {p.skin.r - shade, p.skin.g - shade, p.skin.b - shade};
  }
  if (made_up) c = {c.r + 30, c.g - 28, c.b + 26};
  return c;
}

struct RenderedPair {
  ImageBuffer source;
  ImageBuffer generated;
  RegionMaskSet source_masks;
  RegionMaskSet generated_masks;
};

RegionMaskSet masks_for(const FaceLayout& f, Dims dims) {
  BinaryMask face(dims), eyes(dims), teeth(dims), contour(dims);
  for (std::size_t y = 0; y < dims.height; ++y) {
    for (std::size_t x = 0; x < dims.width; ++x) {
      const double px = double(x), py = double(y);
      face.set(x, y, f.in_face(px, py));
      eyes.set(x, y, f.in_eyes(px, py));
      teeth.set(x, y, f.in_teeth(px, py));
      contour.set(x, y, f.in_contour(px, py));
    }
  }
  return RegionMaskSet(std::move(face), std::move(eyes), std::move(teeth),
                       std::move(contour));
}

RenderedPair render_pair(DefectClass defect, Dims dims, Rng& rng,
                         double shift_fraction) {
  const double w = double(dims.width), h = double(dims.height);
  FaceLayout face{w / 2 + rng.uniform(-0.05, 0.05) * w,
                  h / 2 + rng.uniform(-0.04, 0.04) * h,
                  rng.uniform(0.22, 0.26) * w, rng.uniform(0.28, 0.31) * h,
                  rng.unit() < 0.5};
  Palette pal;
  pal.bg0 = {int(rng.uniform_int(50, 110)), int(rng.uniform_int(50, 110)),
             int(rng.uniform_int(50, 110))};
  pal.bg1 = {int(rng.uniform_int(90, 170)), int(rng.uniform_int(90, 170)),
             int(rng.uniform_int(90, 170))};
  pal.skin = {int(rng.uniform_int(170, 200)), int(rng.uniform_int(120, 150)),
              int(rng.uniform_int(95, 125))};
  pal.stripe_period = rng.uniform(0.1, 0.3) * w;
  const double dx =
      (rng.unit() < 0.5 ? -1.0 : 1.0) * std::round(shift_fraction * 2 * face.a);

  ImageBuffer source(dims.width, dims.height, 3);
  ImageBuffer generated(dims.width, dims.height, 3);
  const FaceLayout gen_face =
      defect == DefectClass::kMisaligned ? face.shifted(dx) : face;
  const bool made_up = defect != DefectClass::kNoMakeup;
  const std::size_t band = dims.height / 5;

  for (std::size_t y = 0; y < dims.height; ++y) {
    for (std::size_t x = 0; x < dims.width; ++x) {
      const double px = double(x), py = double(y);
      const Rgb bg = background_at(pal, dims, x, y);
      if (!face.in_face(px, py)) {
        put(source, x, y, bg);
        Rgb g = bg;
        if (defect == DefectClass::kBackgroundShift && y < band) {
          const int off = (bg.r + bg.g + bg.b) / 3 < 128 ? 60 : -60;
          g = {bg.r + off, bg.g + off, bg.b + off};
        }
        put(generated, x, y, g);
        continue;
      }
      put(source, x, y, face_at(face, pal, px, py, false));
      // Generated content stays inside the source face outline so that a
      // misaligned pair is not also a background defect.
      const Rgb g = gen_face.in_face(px, py)
                        ? face_at(gen_face, pal, px, py, made_up)
                        : bg;
      put(generated, x, y, defect == DefectClass::kNoMakeup
                               ? face_at(face, pal, px, py, false)
                               : g);
    }
  }
  return {std::move(source), std::move(generated), masks_for(face, dims),
          masks_for(gen_face, dims)};
}

std::string pad(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05zu", i);
  return buf;
}

}  // namespace

std::string to_string(DefectClass defect) {
  switch (defect) {
    case DefectClass::kClean:
      return "clean";
    case DefectClass::kMisaligned:
      return "misaligned";
    case DefectClass::kNoMakeup:
      return "nomakeup";
    case DefectClass::kBackgroundShift:
      return "bgshift";
  }
  return "unknown";
}

std::array<bool, 3> expected_passes(DefectClass defect) {
  switch (defect) {
    case DefectClass::kClean:
      return {true, true, true};
    case DefectClass::kMisaligned:
      return {false, true, true};
    case DefectClass::kNoMakeup:
      return {true, false, true};
    case DefectClass::kBackgroundShift:
      return {true, true, false};
  }
  return {};
}

std::map<DefectClass, std::size_t> parse_corpus_counts(const std::string& s) {
  std::map<DefectClass, std::size_t> counts;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalidArgument,
                  "counts entry '" + item + "' is not name=value");
    }
    const std::string name = item.substr(0, eq);
    std::size_t consumed = 0;
    long long value = -1;
    try {
      value = std::stoll(item.substr(eq + 1), &consumed);
    } catch (const std::exception&) {
    }
    if (value < 0 || consumed != item.size() - eq - 1) {
      throw Error(ErrorKind::kInvalidArgument,
                  "counts entry '" + item + "' has a bad value");
    }
    bool known = false;
    for (DefectClass d :
         {DefectClass::kClean, DefectClass::kMisaligned, DefectClass::kNoMakeup,
          DefectClass::kBackgroundShift}) {
      if (to_string(d) == name) {
        counts[d] = static_cast<std::size_t>(value);
        known = true;
      }
    }
    if (!known) {
      throw Error(ErrorKind::kInvalidArgument,
                  "unknown defect class '" + name + "'");
    }
  }
  return counts;
}

Dims parse_dims(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x != std::string::npos) {
      std::size_t a = 0, b = 0;
      const auto w = std::stoul(s.substr(0, x), &a);
      const auto h = std::stoul(s.substr(x + 1), &b);
      const bool digits = std::isdigit(static_cast<unsigned char>(s[0])) &&
                          std::isdigit(static_cast<unsigned char>(s[x + 1]));
      if (digits && a == x && b == s.size() - x - 1 && w > 0 && h > 0) {
        return {w, h};
      }
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::kInvalidArgument, "dims '" + s + "' is not WxH");
}

fs::path gen_synthetic_corpus(const CorpusSpec& spec) {
  if (spec.dims.width < 64 || spec.dims.height < 64) {
    throw Error(ErrorKind::kInvalidArgument,
                "corpus dims must be at least 64x64, got " +
                    to_string(spec.dims));
  }
  std::vector<DefectClass> plan;
  for (const auto& [defect, n] : spec.counts) plan.insert(plan.end(), n, defect);

  fs::create_directories(spec.out_dir / "images");
  fs::create_directories(spec.out_dir / "masks");

  std::vector<std::string> lines(plan.size());
  std::vector<std::string> errors(plan.size());
  parallel_for(plan.size(), spec.workers, [&](std::size_t i) {
    try {
      Rng rng(mix_seed(spec.seed, i));
      const DefectClass defect = plan[i];
      const std::string id = to_string(defect) + "_" + pad(i);
      const RenderedPair pair =
          render_pair(defect, spec.dims, rng, spec.misalignment_shift);

      ordered_json j;
      j["id"] = id;
      j["source_path"] = "images/" + id + ".src.png";
      j["generated_path"] = "images/" + id + ".gen.png";
      j["prompt_tag"] = kPromptTags[rng.uniform_int(0, 7)];
      save_image(pair.source, spec.out_dir / "images" / (id + ".src.png"));
      save_image(pair.generated, spec.out_dir / "images" / (id + ".gen.png"));
      auto write_set = [&](const RegionMaskSet& set, const std::string& side) {
        const std::pair<const char*, const BinaryMask*> regions[] = {
            {"face", &set.face},
            {"eyes", &set.eyes},
            {"teeth", &set.teeth},
            {"contour", &set.contour}};
        for (const auto& [name, mask] : regions) {
          const std::string file = id + "." + side + "." + name + ".png";
          save_mask(*mask, spec.out_dir / "masks" / file);
          j[(side == "src" ? "source_" : "generated_") + std::string(name)] =
              "masks/" + file;
        }
      };
      write_set(pair.source_masks, "src");
      write_set(pair.generated_masks, "gen");
      j["label"] = to_string(defect);
      lines[i] = j.dump();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorKind::kIo, "gen-corpus: " + e);
  }

  const fs::path manifest = spec.out_dir / "manifest.jsonl";
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, manifest.string() + ": cannot write");
  for (const auto& line : lines) out << line << '\n';
  return manifest;
}

}  // namespace forge
