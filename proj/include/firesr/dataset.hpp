#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "firesr/raster.hpp"
#include "firesr/resample.hpp"

namespace firesr {

/// Maps raw channel units onto the network's input ranges:
/// fire counts -> [0, 1], temperature deviation (degC) -> [-1, 1], burnability already [0, 1].
struct NormalizationSpec {
  double fire_cap = 254.0;
  double temp_halfrange = 10.0;

  Raster normalize_fire(const Raster& counts) const;
  Raster normalize_temp(const Raster& deviation) const;
  /// Inverse of normalize_fire for counts in [0, fire_cap]; rounds to whole counts.
  Raster denormalize_fire(const Raster& normalized) const;
  void validate() const;
};

struct MonthlyRaster {
  int year = 0;
  int month = 0;  // 1-12
  Raster raster;
};

enum class ClimatologyMode { per_calendar_month, all_months };

ClimatologyMode climatology_mode_from_string(std::string_view name);
std::string_view to_string(ClimatologyMode mode);

struct ClimatologyWindow {
  int start_year = 2000;
  int end_year = 2019;
  ClimatologyMode mode = ClimatologyMode::per_calendar_month;
};

/// Subtracts each pixel's climatological mean over the window. In
/// per_calendar_month mode the mean is taken over the same calendar month only.
/// Every calendar month present in the series must be present for every window
/// year; otherwise DataError lists the gaps.
std::vector<MonthlyRaster> temp_deviation(const std::vector<MonthlyRaster>& series,
                                          const ClimatologyWindow& window = {});

/// Land-cover class id -> burnable (1) / non-burnable (0).
struct LandcoverMapping {
  std::string name;
  std::map<int, int> classes;
};

/// Built-in table over the 38 ESA CCI land-cover classes. Shrubland and
/// grassland classes are non-burnable for "US" and burnable for "AUS".
LandcoverMapping default_landcover_mapping(std::string_view region);
LandcoverMapping load_landcover_mapping(const std::string& path);
void save_landcover_mapping(const LandcoverMapping& mapping, const std::string& path);

/// Binary burnability per source pixel, then bilinear resampling to the target dims.
Raster burnable_index(const Raster& landcover, const LandcoverMapping& mapping,
                      std::size_t target_width, std::size_t target_height);

struct SampleInfo {
  int year = 0;
  int month = 0;
  std::string region;

  std::string id() const;
};

struct Sample {
  ChannelStack lr_input;  // fire, temp_dev, burnable (normalized)
  Raster hr_target;       // normalized fire at lr dims * scale
  SampleInfo info;
  int scale = 4;
};

/// Normalizes the three aligned HR channels and derives the LR inputs by
/// degrading each one by `scale`.
Sample build_sample(const Raster& fire_counts_hr, const Raster& temp_dev_hr,
                    const Raster& burnable_hr, int scale, const NormalizationSpec& norm,
                    SampleInfo info, Degradation degradation = Degradation::block_average);

// ---------------------------------------------------------------------------
// Manifests and splits

enum class Split { train, val, test };

std::string_view to_string(Split s);
Split split_from_string(std::string_view name);

struct ManifestEntry {
  std::string id;
  int year = 0;
  int month = 0;
  std::string region;
  Split split = Split::train;
  /// role -> path relative to the manifest directory
  std::map<std::string, std::string> files;
};

/// Months to drop for one region (empty region matches every region).
struct MonthMask {
  std::string region;
  int year = 0;
  std::vector<int> months;
};

struct SplitConfig {
  double val_fraction = 0.15;
  int test_start_year = 2017;
  /// When set, only these regions are kept (in every split).
  std::optional<std::vector<std::string>> regions;
  std::vector<MonthMask> exclude;
};

/// Years before test_start_year go to train/val, the rest to test. Validation is the
/// chronologically last val_fraction of the distinct pre-test months. Output is
/// ordered by (year, month, region). Throws DataError if no training sample remains.
std::vector<ManifestEntry> split_manifest(std::vector<ManifestEntry> entries,
                                          const SplitConfig& config);

struct DatasetManifest {
  int scale = 4;
  NormalizationSpec norm;
  std::uint64_t seed = 0;
  Degradation degradation = Degradation::block_average;
  int test_start_year = 2017;  // split boundary the entries were assigned with
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> in_split(Split s) const;
};

/// Writes <dir>/manifest.jsonl (one record per sample) and <dir>/dataset.json
/// (scale, normalization, seed, degradation, test_start_year).
void write_manifest(const DatasetManifest& manifest, const std::string& dir);
DatasetManifest read_manifest(const std::string& dir);

/// Writes the sample's four rasters under <dir>/samples and returns role -> relative path.
std::map<std::string, std::string> write_sample(const Sample& sample, const std::string& dir);
Sample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry,
                   const std::string& dir);
std::vector<Sample> load_split(const DatasetManifest& manifest, Split split,
                               const std::string& dir);

/// Checks the manifest invariants (disjoint splits, temporal boundary); throws DataError.
void check_manifest(const DatasetManifest& manifest, int test_start_year = 2017);

}  // namespace firesr
