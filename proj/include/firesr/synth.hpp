#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "firesr/dataset.hpp"

namespace firesr {

struct SynthConfig {
  std::uint64_t seed = 0;
  int n_months = 246;
  std::size_t hr_width = 128;
  std::size_t hr_height = 64;
  int scale = 4;
  int start_year = 2000;
  int start_month = 3;
  std::vector<std::string> regions = {"US"};
  NormalizationSpec norm;

  // Generation parameters.
  double seasonal_amplitude = 3.0;   // degC
  double anomaly_amplitude = 4.0;    // degC, peak-to-peak of the smooth anomaly field
  double warming_per_year = 0.03;    // degC per year
  double blob_density = 0.0125;      // candidate fire centres per HR pixel per month
  double fire_gain = 0.25;           // counts per unit blob envelope per unit intensity
  // Blob sigma in LR pixels (multiplied by scale on the HR grid), so every scale
  // variant faces the same sub-pixel localization problem.
  double blob_sigma_lr_min = 0.125;
  double blob_sigma_lr_max = 0.375;
  double burnable_level = 0.55;      // smoothed-noise level where burnability starts
  double burnable_ramp = 0.02;       // noise span over which burnability rises 0 -> 1
};

/// One month of raw synthetic channels on the HR grid.
struct SynthMonth {
  SampleInfo info;
  Raster fire_counts;  // integer counts in [0, 254]
  Raster temp_dev;     // degC
  Raster burnable;     // [0, 1], fixed per region
};

/// Deterministic in the config. Burnability is smoothed uniform noise passed
/// through a soft threshold; temperature deviation is smooth noise plus a
/// seasonal sinusoid; fires are Gaussian blobs whose centres are accepted in
/// proportion to burnable * max(0, temp_dev) and whose counts are modulated by
/// that same intensity, rounded to whole counts.
std::vector<SynthMonth> synth_generate_raw(const SynthConfig& config);

/// synth_generate_raw followed by build_sample for every month.
std::vector<Sample> synth_generate(const SynthConfig& config);

}  // namespace firesr
