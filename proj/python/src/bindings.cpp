#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "firesr/dataset.hpp"
#include "firesr/error.hpp"
#include "firesr/evaluation.hpp"
#include "firesr/metrics.hpp"
#include "firesr/network.hpp"
#include "firesr/raster.hpp"
#include "firesr/raster_io.hpp"
#include "firesr/resample.hpp"
#include "firesr/synth.hpp"
#include "firesr/training.hpp"

namespace py = pybind11;
using namespace firesr;

namespace {

using Array2D = py::array_t<double, py::array::c_style | py::array::forcecast>;

Raster to_raster(const Array2D& a) {
  if (a.ndim() != 2) throw UsageError("expected a 2D array");
  const auto h = static_cast<std::size_t>(a.shape(0));
  const auto w = static_cast<std::size_t>(a.shape(1));
  std::vector<double> v(a.data(), a.data() + w * h);
  return Raster(w, h, std::move(v));
}

Array2D to_array(const Raster& r) {
  Array2D a({r.height(), r.width()});
  std::memcpy(a.mutable_data(), r.values().data(), r.size() * sizeof(double));
  return a;
}

ChannelStack to_stack(const Array2D& fire, const Array2D& temp, const Array2D& burnable) {
  return ChannelStack({to_raster(fire), to_raster(temp), to_raster(burnable)},
                      {std::begin(kInputRoles), std::end(kInputRoles)});
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["model"] = r.model_name;
  d["scale"] = r.scale;
  d["rmse"] = r.rmse;
  d["r2"] = r.r2 ? py::cast(*r.r2) : py::none();
  d["precision"] = r.precision;
  d["f1"] = r.f1;
  d["threat_score"] = r.threat_score;
  d["n_pixels"] = r.n_pixels;
  return d;
}

}  // namespace

PYBIND11_MODULE(_firesr, m) {
  m.doc() = "FireSRnet super-resolution core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def("bilinear", [](const Array2D& a, std::size_t w, std::size_t h) {
    return to_array(bilinear_resample(to_raster(a), w, h));
  }, py::arg("array"), py::arg("width"), py::arg("height"));
  m.def("bicubic", [](const Array2D& a, std::size_t w, std::size_t h) {
    return to_array(bicubic_resample(to_raster(a), w, h));
  }, py::arg("array"), py::arg("width"), py::arg("height"));
  m.def("block_average", [](const Array2D& a, std::size_t factor) {
    return to_array(block_average_downsample(to_raster(a), factor));
  }, py::arg("array"), py::arg("factor"));
  m.def("degrade", [](const Array2D& a, std::size_t factor, const std::string& method) {
    return to_array(degrade(to_raster(a), factor, degradation_from_string(method)));
  }, py::arg("array"), py::arg("factor"), py::arg("method") = "block_average");

  m.def("read_raster", [](const std::string& path) { return to_array(read_raster_any(path)); },
        py::arg("path"));
  m.def("write_raster", [](const Array2D& a, const std::string& path) {
    write_raster(to_raster(a), path);
  }, py::arg("array"), py::arg("path"));

  m.def("binarize", [](const Array2D& a, double threshold) {
    const BinaryFireMap b = binarize(to_raster(a), threshold);
    py::array_t<bool> out({b.height, b.width});
    auto* dst = out.mutable_data();
    for (std::size_t i = 0; i < b.bits.size(); ++i) dst[i] = b.bits[i] != 0;
    return out;
  }, py::arg("array"), py::arg("threshold") = kDefaultFireThreshold);

  m.def("metrics", [](const std::vector<Array2D>& preds, const std::vector<Array2D>& targets,
                      double threshold) {
    if (preds.size() != targets.size()) throw UsageError("preds and targets differ in length");
    std::vector<Raster> p, t;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      p.push_back(to_raster(preds[i]));
      t.push_back(to_raster(targets[i]));
    }
    return report_dict(evaluate_predictions("", 0, p, t, threshold));
  }, py::arg("preds"), py::arg("targets"), py::arg("threshold") = kDefaultFireThreshold);

  py::class_<NetworkWeights>(m, "Network")
      .def(py::init([](int scale, std::size_t c1, std::size_t c2, std::size_t c3,
                       std::uint64_t seed) {
             return build_network(scale, ChannelConfig{c1, c2, c3}, seed);
           }),
           py::arg("scale") = 4, py::arg("c1") = 16, py::arg("c2") = 8, py::arg("c3") = 8,
           py::arg("seed") = 0)
      .def_property_readonly("scale", [](const NetworkWeights& n) { return n.scale; })
      .def_property_readonly("parameter_count", &NetworkWeights::parameter_count)
      .def_property_readonly("metadata", [](const NetworkWeights& n) { return n.metadata; })
      .def("forward", [](const NetworkWeights& n, const Array2D& fire, const Array2D& temp,
                         const Array2D& burnable) {
        return to_array(forward(n, to_stack(fire, temp, burnable)));
      }, py::arg("fire"), py::arg("temp_dev"), py::arg("burnable"))
      .def("infer_coarse", [](const NetworkWeights& n, const Array2D& fire, const Array2D& temp,
                              const Array2D& burnable, std::size_t lr_width,
                              std::size_t lr_height, std::optional<double> fire_divisor) {
        CoarseInferenceOptions opt;
        opt.fire_divisor = fire_divisor;
        return to_array(infer_coarse(n, to_raster(fire), to_raster(temp), to_raster(burnable),
                                     lr_width, lr_height, opt));
      }, py::arg("fire"), py::arg("temp_dev"), py::arg("burnable"), py::arg("lr_width"),
         py::arg("lr_height"), py::arg("fire_divisor") = py::none())
      .def("save", [](const NetworkWeights& n, const std::string& path) { save_weights(n, path); },
           py::arg("path"))
      .def_static("load", &load_weights, py::arg("path"));

  m.def("synth", [](const std::string& out_dir, std::uint64_t seed, int months, std::size_t width,
                    std::size_t height, int scale, int start_year, double val_fraction,
                    int test_start_year) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.n_months = months;
    cfg.hr_width = width;
    cfg.hr_height = height;
    cfg.scale = scale;
    cfg.start_year = start_year;
    cfg.start_month = 1;
    std::filesystem::create_directories(out_dir);
    const std::vector<Sample> samples = synth_generate(cfg);
    DatasetManifest manifest;
    manifest.scale = scale;
    manifest.norm = cfg.norm;
    manifest.seed = seed;
    manifest.test_start_year = test_start_year;
    for (const Sample& s : samples) {
      ManifestEntry e;
      e.id = s.info.id();
      e.year = s.info.year;
      e.month = s.info.month;
      e.region = s.info.region;
      e.files = write_sample(s, out_dir);
      manifest.entries.push_back(std::move(e));
    }
    SplitConfig split;
    split.val_fraction = val_fraction;
    split.test_start_year = test_start_year;
    manifest.entries = split_manifest(std::move(manifest.entries), split);
    write_manifest(manifest, out_dir);
    return samples.size();
  }, py::arg("out_dir"), py::arg("seed") = 0, py::arg("months") = 48, py::arg("width") = 64,
     py::arg("height") = 32, py::arg("scale") = 4, py::arg("start_year") = 2014,
     py::arg("val_fraction") = 0.15, py::arg("test_start_year") = 2017);

  m.def("train", [](const std::string& data_dir, int epochs, std::size_t batch_size,
                    double learning_rate, std::optional<std::size_t> crop, std::uint64_t seed) {
    const DatasetManifest manifest = read_manifest(data_dir);
    TrainConfig cfg;
    cfg.max_epochs = epochs;
    cfg.patience = epochs;
    cfg.batch_size = batch_size;
    cfg.adam.learning_rate = learning_rate;
    cfg.crop_size = crop;
    cfg.seed = seed;
    TrainResult r = [&] {
      py::gil_scoped_release release;
      return train(manifest, data_dir, manifest.scale, cfg);
    }();
    py::list log;
    for (const LogRow& row : r.state.log) {
      log.append(py::make_tuple(row.epoch, row.train_loss, row.val_loss));
    }
    return py::make_tuple(std::move(r.weights), log);
  }, py::arg("data_dir"), py::arg("epochs") = 10, py::arg("batch_size") = 8,
     py::arg("learning_rate") = 1e-3, py::arg("crop") = py::none(), py::arg("seed") = 0);

  m.def("evaluate", [](const std::string& data_dir, const std::vector<NetworkWeights>& nets,
                       double threshold) {
    const DatasetManifest manifest = read_manifest(data_dir);
    py::list out;
    for (const EvalReport& r : evaluate_models(manifest, data_dir, nets, threshold)) {
      out.append(report_dict(r));
    }
    return out;
  }, py::arg("data_dir"), py::arg("networks"), py::arg("threshold") = kDefaultFireThreshold);

  m.attr("DEFAULT_FIRE_THRESHOLD") = kDefaultFireThreshold;
}
