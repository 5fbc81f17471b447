#include "firesr/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "firesr/error.hpp"
#include "firesr/raster_io.hpp"
#include "firesr/resample.hpp"

namespace firesr {

EvalReport evaluate_predictions(const std::string& model_name, int scale,
                                const std::vector<Raster>& preds,
                                const std::vector<Raster>& targets, double threshold) {
  if (preds.size() != targets.size()) {
    throw DataError("evaluate: " + std::to_string(preds.size()) + " predictions for " +
                    std::to_string(targets.size()) + " targets");
  }
  ContinuousAccumulator acc;
  Confusion confusion;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].width() != targets[i].width() || preds[i].height() != targets[i].height()) {
      throw DataError("evaluate: prediction " + std::to_string(i) + " is " +
                      std::to_string(preds[i].width()) + "x" + std::to_string(preds[i].height()) +
                      ", target is " + std::to_string(targets[i].width()) + "x" +
                      std::to_string(targets[i].height()));
    }
    acc.add(preds[i].values(), targets[i].values());
    confusion.add(binarize(preds[i], threshold), binarize(targets[i], threshold));
  }
  const auto cont = acc.result();
  const auto cls = classification_metrics(confusion);
  return {model_name, scale,    cont.rmse,  cont.r2, cls.precision,
          cls.f1,     cls.threat, cont.n, threshold};
}

Raster bicubic_baseline(const Raster& lr_fire, int scale) {
  check_scale(scale);
  const auto s = static_cast<std::size_t>(scale);
  return bicubic_resample(lr_fire, lr_fire.width() * s, lr_fire.height() * s);
}

EvalReport evaluate_network(const std::string& model_name, const NetworkWeights& net,
                            const std::vector<Sample>& samples, double threshold) {
  std::vector<Raster> preds, targets;
  for (const auto& s : samples) {
    if (s.scale != net.scale) {
      throw DataError("evaluate: network is " + std::to_string(net.scale) + "x but sample " +
                      s.info.id() + " is " + std::to_string(s.scale) + "x");
    }
    preds.push_back(forward(net, s.lr_input));
    targets.push_back(s.hr_target);
  }
  return evaluate_predictions(model_name, net.scale, preds, targets, threshold);
}

EvalReport evaluate_bicubic(const std::string& model_name, int scale,
                            const std::vector<Sample>& samples, double threshold) {
  std::vector<Raster> preds, targets;
  for (const auto& s : samples) {
    preds.push_back(bicubic_baseline(s.lr_input.channel(ChannelRole::fire), scale));
    targets.push_back(s.hr_target);
  }
  return evaluate_predictions(model_name, scale, preds, targets, threshold);
}

std::vector<EvalReport> evaluate_models(const std::vector<Sample>& test_samples,
                                        const std::vector<NetworkWeights>& nets,
                                        double threshold) {
  if (test_samples.empty()) throw DataError("evaluate: test split is empty");
  std::vector<EvalReport> out;
  for (const auto& net : nets) {
    const std::string tag = std::to_string(net.scale) + "x";
    out.push_back(evaluate_network("FireSRnet-" + tag, net, test_samples, threshold));
    out.push_back(evaluate_bicubic("Bicubic-" + tag, net.scale, test_samples, threshold));
  }
  return out;
}

std::vector<EvalReport> evaluate_models(const DatasetManifest& manifest,
                                        const std::string& dataset_dir,
                                        const std::vector<NetworkWeights>& nets,
                                        double threshold) {
  for (const auto& net : nets) {
    if (net.scale != manifest.scale) {
      throw DataError("evaluate: network scale " + std::to_string(net.scale) +
                      "x does not match dataset scale " + std::to_string(manifest.scale) + "x");
    }
  }
  return evaluate_models(load_split(manifest, Split::test, dataset_dir), nets, threshold);
}

std::vector<EvalReport> evaluate_region_models(const std::vector<Sample>& test_samples,
                                               const std::vector<RegionModel>& models,
                                               double threshold) {
  std::vector<EvalReport> out;
  for (const auto& m : models) {
    std::vector<Sample> subset;
    for (const auto& s : test_samples) {
      if (std::find(m.regions.begin(), m.regions.end(), s.info.region) != m.regions.end()) {
        subset.push_back(s);
      }
    }
    std::string label;
    for (const auto& r : m.regions) label += (label.empty() ? "" : "_") + r;
    if (subset.empty()) throw DataError("evaluate: no test samples for regions " + label);
    out.push_back(evaluate_network("FireSRnet (" + label + ")", m.net, subset, threshold));
  }
  return out;
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string full(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string format_report_table(const std::vector<EvalReport>& reports) {
  std::size_t name_w = 5;
  for (const auto& r : reports) name_w = std::max(name_w, r.model_name.size());
  std::ostringstream os;
  auto cell = [&](const std::string& s, std::size_t w) {
    os << s << std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  cell("Model", name_w + 2);
  for (const char* h : {"RMSE", "R2", "Precision", "F1"}) cell(h, 11);
  os << "Threat Score\n";
  os << std::string(name_w + 2 + 4 * 11 + 12, '-') << "\n";
  for (const auto& r : reports) {
    cell(r.model_name, name_w + 2);
    cell(fixed4(r.rmse), 11);
    cell(r.r2 ? fixed4(*r.r2) : "n/a", 11);
    cell(fixed4(r.precision), 11);
    cell(fixed4(r.f1), 11);
    os << fixed4(r.threat_score) << "\n";
  }
  if (!reports.empty()) {
    os << "\nPooled over " << reports.front().n_pixels
       << " test pixels; fire pixel = value > " << full(reports.front().threshold)
       << ". Zero denominators score 1 when there are no missed fires, else 0; "
          "R2 is n/a when the target has no variance.\n";
  }
  return os.str();
}

std::string format_report_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "model,scale,rmse,r2,precision,f1,threat_score,n_pixels,threshold\n";
  for (const auto& r : reports) {
    os << r.model_name << "," << r.scale << "," << full(r.rmse) << ","
       << (r.r2 ? full(*r.r2) : std::string("NA")) << "," << full(r.precision) << ","
       << full(r.f1) << "," << full(r.threat_score) << "," << r.n_pixels << ","
       << full(r.threshold) << "\n";
  }
  return os.str();
}

ChannelStack coarse_input_stack(const Raster& coarse_fire, const Raster& coarse_temp_dev,
                                const Raster& burnable, std::size_t lr_width,
                                std::size_t lr_height, const CoarseInferenceOptions& options) {
  options.norm.validate();
  Raster fire = bilinear_resample(coarse_fire, lr_width, lr_height);
  const double fire_max = coarse_fire.with_nodata_zeroed().max();
  if (options.fire_divisor) {
    if (!(*options.fire_divisor > 0.0)) throw UsageError("fire divisor must be positive");
    for (double& v : fire.values()) v /= *options.fire_divisor;
  } else if (fire_max > 1.0) {
    throw UsageError("coarse fire channel reaches " + std::to_string(fire_max) +
                     " > 1; supply a rescale divisor (e.g. 100 for burned area in percent)");
  }
  for (double& v : fire.values()) v = std::clamp(v, 0.0, 1.0);

  Raster temp = options.norm.normalize_temp(bilinear_resample(coarse_temp_dev, lr_width, lr_height));

  Raster burn = [&] {
    for (std::size_t f : {2u, 4u, 8u}) {
      if (burnable.width() == lr_width * f && burnable.height() == lr_height * f) {
        return block_average_downsample(burnable, f);
      }
    }
    return bilinear_resample(burnable, lr_width, lr_height);
  }();
  for (double& v : burn.values()) v = std::clamp(v, 0.0, 1.0);

  // All channels share the LR grid derived from the fire field.
  temp.set_geo(fire.geo());
  burn.set_geo(fire.geo());
  std::vector<Raster> channels;
  channels.push_back(std::move(fire));
  channels.push_back(std::move(temp));
  channels.push_back(std::move(burn));
  return ChannelStack(std::move(channels), {std::begin(kInputRoles), std::end(kInputRoles)});
}

Raster infer_coarse(const NetworkWeights& net, const Raster& coarse_fire,
                    const Raster& coarse_temp_dev, const Raster& burnable, std::size_t lr_width,
                    std::size_t lr_height, const CoarseInferenceOptions& options) {
  return forward(net, coarse_input_stack(coarse_fire, coarse_temp_dev, burnable, lr_width,
                                         lr_height, options));
}

void export_triptych(const Sample& sample, const NetworkWeights& net, const std::string& path) {
  write_ppm_panels({sample.hr_target, forward(net, sample.lr_input),
                    bicubic_baseline(sample.lr_input.channel(ChannelRole::fire), sample.scale)},
                   path);
}

}  // namespace firesr
