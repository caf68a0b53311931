// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "forge/config.hpp"
#include "forge/error.hpp"
#include "forge/filters.hpp"
#include "forge/injector_checks.hpp"
#include "forge/mask_algebra.hpp"
#include "forge/metrics.hpp"
#include "forge/pipeline.hpp"

namespace py = pybind11;
using namespace forge;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

ImageBuffer to_image(const U8Array& a) {
  if (a.ndim() == 2) {
    return ImageBuffer(a.shape(1), a.shape(0), 1,
                       std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() == 3) {
    return ImageBuffer(a.shape(1), a.shape(0), a.shape(2),
                       std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
  }
  throw Error(ErrorKind::kInvalidArgument, "image array must be HxW or HxWxC");
}

BinaryMask to_mask(const U8Array& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::kInvalidArgument, "mask must be HxW");
  return BinaryMask(Dims{static_cast<std::size_t>(a.shape(1)),
                         static_cast<std::size_t>(a.shape(0))},
                    std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

U8Array from_image(const ImageBuffer& img) {
  std::vector<py::ssize_t> shape = {static_cast<py::ssize_t>(img.height()),
                                    static_cast<py::ssize_t>(img.width())};
  if (img.channels() == 3) shape.push_back(3);
  U8Array out(shape);
  std::memcpy(out.mutable_data(), img.data().data(), img.data().size());
  return out;
}

U8Array from_mask(const BinaryMask& m) {
  U8Array out({static_cast<py::ssize_t>(m.height()), static_cast<py::ssize_t>(m.width())});
  std::memcpy(out.mutable_data(), m.values().data(), m.values().size());
  return out;
}

FilterConfig config_from(const py::object& cfg) {
  if (cfg.is_none()) return FilterConfig{};
  auto json = py::module_::import("json");
  const std::string text = py::str(json.attr("dumps")(cfg));
  return filter_config_from_json(nlohmann::json::parse(text));
}

py::dict verdict_dict(const FilterVerdict& v) {
  py::dict d;
  d["filter_name"] = std::string(to_string(v.filter_name));
  d["passed"] = v.passed;
  d["statistic"] = v.statistic;
  d["threshold_used"] = v.threshold_used;
  d["reason"] = v.reason;
  return d;
}

}  // namespace

PYBIND11_MODULE(_forge, m) {
  m.doc() = "Paired makeup dataset curation toolkit";

  static py::exception<Error> forge_error(m, "ForgeError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      forge_error(e.what());
    }
  });

  m.def("load_image", [](const std::filesystem::path& p) { return from_image(load_image(p)); },
        py::arg("path"));
  m.def("save_image", [](const U8Array& a, const std::filesystem::path& p) {
    save_image(to_image(a), p);
  }, py::arg("image"), py::arg("path"));
  m.def("load_mask", [](const std::filesystem::path& p, std::size_t width, std::size_t height) {
    return from_mask(load_mask(p, {width, height}));
  }, py::arg("path"), py::arg("width"), py::arg("height"));
  m.def("save_mask", [](const U8Array& a, const std::filesystem::path& p) {
    save_mask(to_mask(a), p);
  }, py::arg("mask"), py::arg("path"));

  m.def("non_overlap_count", [](const U8Array& a, const U8Array& b) {
    return non_overlap_count(to_mask(a), to_mask(b));
  });
  m.def("area", [](const U8Array& a) { return area(to_mask(a)); });
  m.def("thresholded_diff_count",
        [](const U8Array& a, const U8Array& b, const U8Array& mask, double t) {
          return thresholded_diff_count(to_image(a), to_image(b), to_mask(mask), t);
        });

  m.def("ssim", [](const U8Array& a, const U8Array& b) {
    return ssim(to_image(a), to_image(b));
  });
  m.def("l2m", [](const U8Array& a, const U8Array& b, const U8Array& face) {
    return l2m(to_image(a), to_image(b), to_mask(face));
  });
  m.def("clip_i", [](std::vector<float> a, std::vector<float> b) {
    return clip_i({std::move(a)}, {std::move(b)});
  });
  m.def("read_embedding", [](const std::filesystem::path& p) {
    return read_embedding(p).values;
  });
  m.def("write_embedding", [](std::vector<float> v, const std::filesystem::path& p) {
    write_embedding({std::move(v)}, p);
  });

  m.def("misalignment_filter",
        [](py::dict src, py::dict gen, const py::object& cfg) {
          auto set = [](py::dict d) {
            return RegionMaskSet(to_mask(d["face"].cast<U8Array>()),
                                 to_mask(d["eyes"].cast<U8Array>()),
                                 to_mask(d["teeth"].cast<U8Array>()),
                                 to_mask(d["contour"].cast<U8Array>()));
          };
          return verdict_dict(misalignment_filter(set(src), set(gen), config_from(cfg)));
        },
        py::arg("source_masks"), py::arg("generated_masks"), py::arg("config") = py::none());
  m.def("makeup_failed_filter",
        [](const U8Array& s, const U8Array& g, const U8Array& face, const py::object& cfg) {
          return verdict_dict(
              makeup_failed_filter(to_image(s), to_image(g), to_mask(face), config_from(cfg)));
        },
        py::arg("source"), py::arg("generated"), py::arg("source_face"),
        py::arg("config") = py::none());
  m.def("background_filter",
        [](const U8Array& s, const U8Array& g, const U8Array& face, const py::object& cfg) {
          return verdict_dict(
              background_filter(to_image(s), to_image(g), to_mask(face), config_from(cfg)));
        },
        py::arg("source"), py::arg("generated"), py::arg("source_face"),
        py::arg("config") = py::none());

  m.def("filter_manifest",
        [](const std::filesystem::path& in, const std::filesystem::path& out,
           const py::object& cfg, std::size_t workers,
           std::optional<std::filesystem::path> rejected) {
          PipelineConfig pc;
          pc.filter = config_from(cfg);
          pc.workers = workers;
          pc.out = out;
          pc.rejected = std::move(rejected);
          FilterRunSummary s;
          {
            py::gil_scoped_release release;
            s = run_filter_pipeline(in, pc);
          }
          py::dict d;
          d["total"] = s.total;
          d["passed"] = s.passed;
          d["failed"] = s.failed;
          d["errors"] = s.errors;
          return d;
        },
        py::arg("manifest"), py::arg("out"), py::arg("config") = py::none(),
        py::arg("workers") = 1, py::arg("rejected") = py::none());
  m.def("report", [](const std::filesystem::path& manifest) {
    const auto rep = build_report(read_manifest(manifest));
    return py::module_::import("json").attr("loads")(rep.json.dump());
  });
  m.def("gen_corpus",
        [](const std::filesystem::path& out, std::uint64_t seed, const std::string& counts,
           const std::string& dims) {
          CorpusSpec spec;
          spec.seed = seed;
          spec.out_dir = out;
          spec.counts = parse_corpus_counts(counts);
          spec.dims = parse_dims(dims);
          py::gil_scoped_release release;
          return gen_synthetic_corpus(spec);
        },
        py::arg("out"), py::arg("seed"), py::arg("counts"), py::arg("dims") = "128x128");
  m.def("inject_check", [](std::uint64_t seed) {
    py::list rows;
    for (const auto& c : injector::run_injector_checks(seed).checks) {
      py::dict d;
      d["name"] = c.name;
      d["passed"] = c.passed;
      d["measured"] = c.measured;
      d["tolerance"] = c.tolerance;
      rows.append(d);
    }
    return rows;
  }, py::arg("seed"));
}
