#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "plume/detector/baseline.hpp"
#include "plume/evaluation.hpp"
#include "plume/pipeline.hpp"
#include "plume/retrieval.hpp"
#include "plume/synth.hpp"

namespace py = pybind11;
using namespace plume;
using nlohmann::json;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8 = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

Mask to_mask(const U8& a) {
  if (a.ndim() != 2) throw ShapeError("mask must be 2-D");
  Mask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

U8 from_mask(const Mask& m) {
  U8 out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

// Masked pixels come back as NaN.
F32 from_band(const Raster& r, int b) {
  F32 out({r.rows, r.cols});
  float* p = out.mutable_data();
  for (int y = 0; y < r.rows; ++y)
    for (int x = 0; x < r.cols; ++x)
      *p++ = r.masked(y, x) ? std::numeric_limits<float>::quiet_NaN() : r.at(b, y, x);
  return out;
}

Raster to_raster(const F32& a, const std::optional<U8>& nodata) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("raster must be (rows, cols) or (bands, rows, cols)");
  const int bands = a.ndim() == 3 ? static_cast<int>(a.shape(0)) : 1;
  const int rows = static_cast<int>(a.shape(a.ndim() - 2));
  const int cols = static_cast<int>(a.shape(a.ndim() - 1));
  Raster r(rows, cols, bands);
  std::copy(a.data(), a.data() + a.size(), r.values.begin());
  if (nodata) {
    r.nodata_mask = to_mask(*nodata);
    if (!r.nodata_mask.same_shape(Mask(rows, cols))) throw ShapeError("nodata mask shape differs from raster");
  }
  r.validate();
  return r;
}

py::dict metrics_dict(const BinaryMetrics& m) {
  py::dict d;
  d["tp"] = m.tp;
  d["fp"] = m.fp;
  d["fn"] = m.fn;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of plume_kit";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<Error>(m, "PlumeError", PyExc_RuntimeError);

  m.def("sha256_hex", &sha256_hex, py::arg("data"));
  m.def("validate_config", [](const std::string& text) { validate_config(json::parse(text)); }, py::arg("config_json"));
  m.def(
      "pipeline_run",
      [](const std::string& text, const std::string& workdir, std::optional<uint64_t> seed) {
        PipelineReport rep;
        {
          py::gil_scoped_release release;
          rep = pipeline_run(json::parse(text), workdir, seed);
        }
        return rep.to_json().dump();
      },
      py::arg("config_json"), py::arg("workdir"), py::arg("seed") = py::none());

  m.def(
      "gen_scene",
      [](const std::string& spec_json) {
        const SynthScene s = gen_scene(spec_from_json(json::parse(spec_json)));
        F32 radiance({s.radiance.bands, s.radiance.rows, s.radiance.cols});
        std::copy(s.radiance.values.begin(), s.radiance.values.end(), radiance.mutable_data());
        F64 target(s.target.t.size());
        std::copy(s.target.t.data(), s.target.t.data() + s.target.t.size(), target.mutable_data());
        py::dict d;
        d["scene_id"] = s.scene_id;
        d["radiance"] = radiance;
        d["nodata"] = from_mask(s.radiance.nodata_mask);
        d["target"] = target;
        d["truth_cmf"] = from_band(s.truth_cmf, 0);
        d["truth_mask"] = from_mask(s.truth_labels.plume_mask);
        d["manifest"] = s.manifest.dump();
        return d;
      },
      py::arg("spec_json"));

  m.def(
      "cmf",
      [](const F32& radiance, const F64& target, std::optional<U8> nodata, std::optional<double> ridge,
         double ppm_scale) {
        const Raster r = to_raster(radiance, nodata);
        TargetSpectrum t;
        t.t = Eigen::Map<const Eigen::VectorXd>(target.data(), target.size());
        CmfOptions opt;
        opt.ridge = ridge;
        opt.ppm_scale = ppm_scale;
        Raster out;
        {
          py::gil_scoped_release release;
          out = cmf_scene(r, t, opt);
        }
        return from_band(out, 0);
      },
      py::arg("radiance"), py::arg("target"), py::arg("nodata") = py::none(), py::arg("ridge") = py::none(),
      py::arg("ppm_scale") = 1.0);

  m.def(
      "baseline_detect",
      [](const F32& cmf, double tau, int min_area) {
        if (cmf.ndim() != 2) throw ShapeError("cmf must be 2-D");
        // NaN marks nodata on the way in as well.
        Raster r = to_raster(cmf, std::nullopt);
        for (int y = 0; y < r.rows; ++y)
          for (int x = 0; x < r.cols; ++x)
            if (std::isnan(r.at(y, x))) {
              r.nodata_mask(y, x) = 1;
              r.at(y, x) = 0.0f;
            }
        const Raster sal = baseline_detect(r, tau, min_area);
        Mask out(r.rows, r.cols);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] = sal.values[i] > 0.5f;
        return from_mask(out);
      },
      py::arg("cmf"), py::arg("tau") = 500.0, py::arg("min_area") = 16);

  m.def(
      "pixel_metrics",
      [](const U8& pred, const U8& label, std::optional<U8> valid) {
        const Mask p = to_mask(pred), l = to_mask(label);
        return metrics_dict(pixel_metrics(p, l, valid ? to_mask(*valid) : Mask(p.rows, p.cols, 1)));
      },
      py::arg("pred"), py::arg("label"), py::arg("valid") = py::none());
  m.def("binary_metrics", [](long long tp, long long fp, long long fn) { return metrics_dict(binary_metrics(tp, fp, fn)); },
        py::arg("tp"), py::arg("fp"), py::arg("fn"));
}
