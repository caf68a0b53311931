// SPDX-License-Identifier: Apache-2.0
#include "forge/manifest.hpp"

#include <fstream>
#include <unordered_set>

#include "forge/error.hpp"

namespace forge {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 4> kRegionKeys = {"face", "eyes",
                                                         "teeth", "contour"};

// Schema keys in serialization order; everything else lands in `extra`.
const std::unordered_set<std::string>& schema_keys() {
  static const std::unordered_set<std::string> keys = {
      "id",
      "source_path",
      "generated_path",
      "prompt_tag",
      "reference_path",
      "source_face",
      "source_eyes",
      "source_teeth",
      "source_contour",
      "generated_face",
      "generated_eyes",
      "generated_teeth",
      "generated_contour",
      "verdicts",
      "passed",
      "error",
      "metrics"};
  return keys;
}

fs::path resolve(const fs::path& base, const std::string& raw) {
  fs::path p(raw);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

std::string relativize(const fs::path& path, const fs::path& base) {
  fs::path rel = path.lexically_relative(base);
  if (rel.empty()) return path.string();
  return rel.generic_string();
}

std::string required_string(const ordered_json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorKind::kManifest,
                "record is missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

RegionPaths read_regions(const ordered_json& j, const std::string& prefix,
                         const fs::path& base) {
  auto get = [&](std::string_view region) {
    return resolve(base, required_string(j, prefix + std::string(region)));
  };
  return {get(kRegionKeys[0]), get(kRegionKeys[1]), get(kRegionKeys[2]),
          get(kRegionKeys[3])};
}

void write_regions(ordered_json& j, const std::string& prefix,
                   const RegionPaths& paths, const fs::path& base) {
  j[prefix + "face"] = relativize(paths.face, base);
  j[prefix + "eyes"] = relativize(paths.eyes, base);
  j[prefix + "teeth"] = relativize(paths.teeth, base);
  j[prefix + "contour"] = relativize(paths.contour, base);
}

}  // namespace

std::string_view to_string(FilterName name) {
  switch (name) {
    case FilterName::kMisalignment:
      return "misalignment";
    case FilterName::kMakeupFailed:
      return "makeup_failed";
    case FilterName::kBackground:
      return "background";
  }
  return "unknown";
}

FilterName filter_name_from_string(std::string_view name) {
  for (FilterName f : kFilterOrder) {
    if (to_string(f) == name) return f;
  }
  throw Error(ErrorKind::kManifest,
              "unknown filter name '" + std::string(name) + "'");
}

ordered_json to_json(const FilterVerdict& verdict) {
  ordered_json j;
  j["filter_name"] = to_string(verdict.filter_name);
  j["passed"] = verdict.passed;
  j["statistic"] = verdict.statistic;
  j["threshold_used"] = verdict.threshold_used;
  j["reason"] = verdict.reason;
  return j;
}

FilterVerdict verdict_from_json(const ordered_json& j) {
  try {
    FilterVerdict v;
    v.filter_name =
        filter_name_from_string(j.at("filter_name").get<std::string>());
    v.passed = j.at("passed").get<bool>();
    v.statistic = j.at("statistic").get<double>();
    v.threshold_used = j.at("threshold_used").get<double>();
    v.reason = j.value("reason", "");
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kManifest, std::string("bad verdict: ") + e.what());
  }
}

PairRecord record_from_json(const ordered_json& j, const fs::path& base_dir) {
  if (!j.is_object()) {
    throw Error(ErrorKind::kManifest, "manifest line is not a JSON object");
  }
  PairRecord r;
  r.id = required_string(j, "id");
  r.source_path = resolve(base_dir, required_string(j, "source_path"));
  r.generated_path = resolve(base_dir, required_string(j, "generated_path"));
  r.prompt_tag = j.contains("prompt_tag") ? required_string(j, "prompt_tag")
                                          : std::string();
  if (j.contains("reference_path")) {
    r.reference_path = resolve(base_dir, required_string(j, "reference_path"));
  }
  r.source_masks = read_regions(j, "source_", base_dir);
  r.generated_masks = read_regions(j, "generated_", base_dir);

  try {
    if (auto it = j.find("verdicts"); it != j.end()) {
      for (const auto& v : *it) r.verdicts.push_back(verdict_from_json(v));
    }
    if (auto it = j.find("passed"); it != j.end()) r.passed = it->get<bool>();
    if (auto it = j.find("error"); it != j.end()) {
      r.error = it->get<std::string>();
    }
    if (auto it = j.find("metrics"); it != j.end()) {
      MetricsRow m;
      if (it->contains("clip_i")) m.clip_i = it->at("clip_i").get<double>();
      m.ssim = it->at("ssim").get<double>();
      m.l2m = it->at("l2m").get<double>();
      r.metrics = m;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kManifest,
                "record '" + r.id + "': bad annotation: " + e.what());
  }

  for (const auto& [key, value] : j.items()) {
    if (!schema_keys().contains(key)) r.extra[key] = value;
  }
  return r;
}

ordered_json record_to_json(const PairRecord& r, const fs::path& base_dir) {
  ordered_json j;
  j["id"] = r.id;
  j["source_path"] = relativize(r.source_path, base_dir);
  j["generated_path"] = relativize(r.generated_path, base_dir);
  j["prompt_tag"] = r.prompt_tag;
  if (r.reference_path) {
    j["reference_path"] = relativize(*r.reference_path, base_dir);
  }
  write_regions(j, "source_", r.source_masks, base_dir);
  write_regions(j, "generated_", r.generated_masks, base_dir);
  for (const auto& [key, value] : r.extra.items()) j[key] = value;

  if (!r.verdicts.empty()) {
    ordered_json verdicts = ordered_json::array();
    for (const auto& v : r.verdicts) verdicts.push_back(to_json(v));
    j["verdicts"] = std::move(verdicts);
  }
  if (r.passed) j["passed"] = *r.passed;
  if (r.error) j["error"] = *r.error;
  if (r.metrics) {
    ordered_json m;
    if (r.metrics->clip_i) m["clip_i"] = *r.metrics->clip_i;
    m["ssim"] = r.metrics->ssim;
    m["l2m"] = r.metrics->l2m;
    j["metrics"] = std::move(m);
  }
  return j;
}

std::string serialize_record(const PairRecord& record,
                             const fs::path& base_dir) {
  return record_to_json(record, base_dir).dump();
}

std::vector<PairRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kManifest, path.string() + ": cannot open manifest");
  }
  const fs::path base = fs::absolute(path).lexically_normal().parent_path();
  std::vector<PairRecord> records;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::kManifest, where + ": " + e.what());
    }
    try {
      records.push_back(record_from_json(j, base));
    } catch (const Error& e) {
      throw Error(ErrorKind::kManifest, where + ": " + e.what());
    }
    if (!ids.insert(records.back().id).second) {
      throw Error(ErrorKind::kManifest,
                  where + ": duplicate id '" + records.back().id + "'");
    }
  }
  return records;
}

void write_manifest(const fs::path& path,
                    const std::vector<PairRecord>& records) {
  const fs::path base = fs::absolute(path).lexically_normal().parent_path();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kIo, path.string() + ": cannot open for writing");
  }
  for (const auto& r : records) out << serialize_record(r, base) << '\n';
  if (!out) throw Error(ErrorKind::kIo, path.string() + ": write failed");
}

fs::path embedding_path_for(const fs::path& image) {
  fs::path p = image;
  p += ".emb";
  return p;
}

}  // namespace forge
