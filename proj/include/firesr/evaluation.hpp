#pragma once

#include <optional>
#include <string>
#include <vector>

#include "firesr/dataset.hpp"
#include "firesr/metrics.hpp"
#include "firesr/network.hpp"

namespace firesr {

struct EvalReport {
  std::string model_name;
  int scale = 0;
  double rmse = 0.0;
  std::optional<double> r2;
  double precision = 0.0;
  double f1 = 0.0;
  double threat_score = 0.0;
  std::size_t n_pixels = 0;
  double threshold = kDefaultFireThreshold;
};

/// Pools continuous and classification metrics over every (prediction, target) pair.
EvalReport evaluate_predictions(const std::string& model_name, int scale,
                                const std::vector<Raster>& preds,
                                const std::vector<Raster>& targets,
                                double threshold = kDefaultFireThreshold);

/// Baseline: bicubic upsampling of the LR fire channel only.
Raster bicubic_baseline(const Raster& lr_fire, int scale);

EvalReport evaluate_network(const std::string& model_name, const NetworkWeights& net,
                            const std::vector<Sample>& samples,
                            double threshold = kDefaultFireThreshold);
EvalReport evaluate_bicubic(const std::string& model_name, int scale,
                            const std::vector<Sample>& samples,
                            double threshold = kDefaultFireThreshold);

/// For each network, one "FireSRnet-<s>x" report followed by one "Bicubic-<s>x"
/// report. Every network's scale must match the samples' scale.
std::vector<EvalReport> evaluate_models(const std::vector<Sample>& test_samples,
                                        const std::vector<NetworkWeights>& nets,
                                        double threshold = kDefaultFireThreshold);
std::vector<EvalReport> evaluate_models(const DatasetManifest& manifest,
                                        const std::string& dataset_dir,
                                        const std::vector<NetworkWeights>& nets,
                                        double threshold = kDefaultFireThreshold);

/// One region-specific model evaluated on that region's test samples.
struct RegionModel {
  std::vector<std::string> regions;
  NetworkWeights net;
};

/// Rows named "FireSRnet (US)", "FireSRnet (AUS)", "FireSRnet (US_AUS)", ...
std::vector<EvalReport> evaluate_region_models(const std::vector<Sample>& test_samples,
                                               const std::vector<RegionModel>& models,
                                               double threshold = kDefaultFireThreshold);

std::string format_report_table(const std::vector<EvalReport>& reports);
std::string format_report_csv(const std::vector<EvalReport>& reports);

struct CoarseInferenceOptions {
  /// Divides the coarse fire-like channel (e.g. burned area in percent) into [0, 1].
  /// Required when that channel exceeds 1.
  std::optional<double> fire_divisor;
  NormalizationSpec norm;
};

/// Regrids coarse climate-model style fields to lr dims (bilinear), rescales the
/// fire channel, normalizes temperature deviation, and runs the network.
/// `burnable` is block-averaged when its dims are lr dims times 2, 4 or 8 and
/// bilinearly regridded otherwise. Output is lr dims x scale, clamped at 0.
Raster infer_coarse(const NetworkWeights& net, const Raster& coarse_fire,
                    const Raster& coarse_temp_dev, const Raster& burnable, std::size_t lr_width,
                    std::size_t lr_height, const CoarseInferenceOptions& options = {});

/// The LR stack infer_coarse feeds to the network.
ChannelStack coarse_input_stack(const Raster& coarse_fire, const Raster& coarse_temp_dev,
                                const Raster& burnable, std::size_t lr_width,
                                std::size_t lr_height, const CoarseInferenceOptions& options = {});

/// Writes a target / FireSRnet / bicubic colour triptych (shared scale) for one sample.
void export_triptych(const Sample& sample, const NetworkWeights& net, const std::string& path);

}  // namespace firesr
