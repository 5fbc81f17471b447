#include "firesr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "firesr/error.hpp"
#include "firesr/raster_io.hpp"

namespace firesr {

// ---------------------------------------------------------------------------
// Normalization

void NormalizationSpec::validate() const {
  if (!(fire_cap > 0.0) || !(temp_halfrange > 0.0)) {
    throw UsageError("normalization: fire_cap and temp_halfrange must be positive");
  }
}

Raster NormalizationSpec::normalize_fire(const Raster& counts) const {
  counts.require_finite("fire counts");
  Raster out = counts.with_nodata_zeroed();
  for (double& v : out.values()) v = std::clamp(v, 0.0, fire_cap) / fire_cap;
  return out;
}

Raster NormalizationSpec::normalize_temp(const Raster& deviation) const {
  deviation.require_finite("temperature deviation");
  Raster out = deviation.with_nodata_zeroed();
  for (double& v : out.values()) v = std::clamp(v, -temp_halfrange, temp_halfrange) / temp_halfrange;
  return out;
}

Raster NormalizationSpec::denormalize_fire(const Raster& normalized) const {
  Raster out = normalized;
  for (double& v : out.values()) v = std::round(v * fire_cap);
  return out;
}

// ---------------------------------------------------------------------------
// Temperature deviation

ClimatologyMode climatology_mode_from_string(std::string_view name) {
  if (name == "per_calendar_month") return ClimatologyMode::per_calendar_month;
  if (name == "all_months") return ClimatologyMode::all_months;
  throw UsageError("unknown climatology mode '" + std::string(name) + "'");
}

std::string_view to_string(ClimatologyMode mode) {
  return mode == ClimatologyMode::per_calendar_month ? "per_calendar_month" : "all_months";
}

namespace {

std::string year_month(int year, int month) {
  std::ostringstream os;
  os << year << "-" << (month < 10 ? "0" : "") << month;
  return os.str();
}

}  // namespace

std::vector<MonthlyRaster> temp_deviation(const std::vector<MonthlyRaster>& series,
                                          const ClimatologyWindow& window) {
  if (series.empty()) throw DataError("temp_deviation: empty series");
  if (window.end_year < window.start_year) {
    throw UsageError("temp_deviation: climatology window end precedes start");
  }
  const Raster& ref = series.front().raster;
  std::set<std::pair<int, int>> present;
  std::set<int> calendar_months;
  for (const auto& m : series) {
    if (m.month < 1 || m.month > 12) {
      throw DataError("temp_deviation: invalid month " + std::to_string(m.month));
    }
    if (!m.raster.same_grid(ref)) {
      throw DataError("temp_deviation: raster for " + year_month(m.year, m.month) +
                      " is on a different grid " + describe(m.raster.geo()) + " than " +
                      describe(ref.geo()));
    }
    m.raster.require_finite("temp_deviation " + year_month(m.year, m.month));
    if (!present.insert({m.year, m.month}).second) {
      throw DataError("temp_deviation: duplicate entry for " + year_month(m.year, m.month));
    }
    calendar_months.insert(m.month);
  }

  std::vector<std::string> gaps;
  for (int y = window.start_year; y <= window.end_year; ++y) {
    for (int cm : calendar_months) {
      if (!present.count({y, cm})) gaps.push_back(year_month(y, cm));
    }
  }
  if (!gaps.empty()) {
    std::ostringstream os;
    os << "temp_deviation: climatology window " << window.start_year << "-" << window.end_year
       << " is missing " << gaps.size() << " month(s):";
    for (const auto& g : gaps) os << " " << g;
    throw DataError(os.str());
  }

  // Per-pixel climatology, indexed by calendar month (or slot 0 for all_months).
  const std::size_t n = ref.size();
  std::vector<std::vector<double>> sums(13, std::vector<double>(n, 0.0));
  std::vector<std::size_t> counts(13, 0);
  for (const auto& m : series) {
    if (m.year < window.start_year || m.year > window.end_year) continue;
    const int slot = window.mode == ClimatologyMode::per_calendar_month ? m.month : 0;
    const Raster clean = m.raster.with_nodata_zeroed();
    auto vals = clean.values();
    for (std::size_t i = 0; i < n; ++i) sums[slot][i] += vals[i];
    ++counts[slot];
  }

  std::vector<MonthlyRaster> out;
  out.reserve(series.size());
  for (const auto& m : series) {
    const int slot = window.mode == ClimatologyMode::per_calendar_month ? m.month : 0;
    Raster dev = m.raster.with_nodata_zeroed();
    auto vals = dev.values();
    const auto count = static_cast<double>(counts[slot]);
    for (std::size_t i = 0; i < n; ++i) vals[i] -= sums[slot][i] / count;
    out.push_back({m.year, m.month, std::move(dev)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Burnable land index

LandcoverMapping default_landcover_mapping(std::string_view region) {
  int open_veg = 0;
  if (region == "AUS") {
    open_veg = 1;
  } else if (region != "US") {
    throw UsageError("no built-in land-cover mapping for region '" + std::string(region) +
                     "' (built-ins: US, AUS)");
  }
  LandcoverMapping m;
  m.name = std::string(region);
  // ESA CCI LC legend.
  for (int c : {0, 10, 11, 12, 20, 30}) m.classes[c] = 0;  // no data, croplands
  for (int c : {40, 50, 60, 61, 62, 70, 71, 72, 80, 81, 82, 90, 100}) m.classes[c] = 1;  // forest, mosaics
  for (int c : {110, 120, 121, 122, 130}) m.classes[c] = open_veg;  // shrubland, grassland
  for (int c : {140, 150, 151, 152, 153}) m.classes[c] = 0;  // lichens, sparse vegetation
  for (int c : {160, 170, 180}) m.classes[c] = 0;            // flooded / wetland
  for (int c : {190, 200, 201, 202, 210, 220}) m.classes[c] = 0;  // urban, bare, water, ice
  return m;
}

LandcoverMapping load_landcover_mapping(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open land-cover mapping '" + path + "'");
  LandcoverMapping m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.name = j.value("name", std::string{});
    for (const auto& [key, value] : j.at("classes").items()) {
      const int v = value.get<int>();
      if (v != 0 && v != 1) {
        throw DataError(path + ": class " + key + " must map to 0 or 1");
      }
      m.classes[std::stoi(key)] = v;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid land-cover mapping: " + e.what());
  } catch (const std::invalid_argument&) {
    throw DataError(path + ": class ids must be integers");
  }
  return m;
}

void save_landcover_mapping(const LandcoverMapping& mapping, const std::string& path) {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [k, v] : mapping.classes) classes[std::to_string(k)] = v;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << nlohmann::json{{"name", mapping.name}, {"classes", classes}}.dump(2) << "\n";
}

Raster burnable_index(const Raster& landcover, const LandcoverMapping& mapping,
                      std::size_t target_width, std::size_t target_height) {
  Raster binary(landcover.width(), landcover.height(), landcover.geo());
  auto src = landcover.values();
  auto dst = binary.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (landcover.is_nodata(src[i])) continue;  // non-burnable
    const double v = src[i];
    if (!std::isfinite(v) || v != std::round(v)) {
      throw DataError("burnable_index: land-cover value " + std::to_string(v) +
                      " is not an integer class id");
    }
    const auto it = mapping.classes.find(static_cast<int>(v));
    if (it == mapping.classes.end()) {
      throw DataError("burnable_index: land-cover class " + std::to_string(static_cast<int>(v)) +
                      " is not in mapping '" + mapping.name + "'");
    }
    dst[i] = it->second;
  }
  Raster out = bilinear_resample(binary, target_width, target_height);
  for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Samples

std::string SampleInfo::id() const {
  return (region.empty() ? std::string("X") : region) + "-" + year_month(year, month);
}

Sample build_sample(const Raster& fire_counts_hr, const Raster& temp_dev_hr,
                    const Raster& burnable_hr, int scale, const NormalizationSpec& norm,
                    SampleInfo info, Degradation degradation) {
  norm.validate();
  for (const Raster* r : {&temp_dev_hr, &burnable_hr}) {
    if (!r->same_grid(fire_counts_hr)) {
      std::ostringstream os;
      os << "build_sample " << info.id() << ": misaligned grids: fire " << fire_counts_hr.width()
         << "x" << fire_counts_hr.height() << " " << describe(fire_counts_hr.geo()) << " vs "
         << r->width() << "x" << r->height() << " " << describe(r->geo());
      throw DataError(os.str());
    }
  }
  if (info.month < 1 || info.month > 12) {
    throw DataError("build_sample: invalid month " + std::to_string(info.month));
  }
  const auto factor = static_cast<std::size_t>(scale);
  Raster fire = norm.normalize_fire(fire_counts_hr);
  Raster temp = norm.normalize_temp(temp_dev_hr);
  Raster burn = burnable_hr.with_nodata_zeroed();
  burn.require_finite("burnable index");
  for (double& v : burn.values()) {
    if (v < 0.0 || v > 1.0) throw DataError("build_sample: burnable index outside [0, 1]");
  }
  std::vector<Raster> lr;
  lr.push_back(degrade(fire, factor, degradation));
  lr.push_back(degrade(temp, factor, degradation));
  lr.push_back(degrade(burn, factor, degradation));
  return Sample{ChannelStack(std::move(lr), {std::begin(kInputRoles), std::end(kInputRoles)}),
                std::move(fire), std::move(info), scale};
}

// ---------------------------------------------------------------------------
// Splits

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw DataError("unknown split '" + std::string(name) + "'");
}

std::vector<ManifestEntry> split_manifest(std::vector<ManifestEntry> entries,
                                          const SplitConfig& config) {
  if (config.val_fraction < 0.0 || config.val_fraction >= 1.0) {
    throw UsageError("val_fraction must be in [0, 1)");
  }
  auto excluded = [&](const ManifestEntry& e) {
    if (config.regions &&
        std::find(config.regions->begin(), config.regions->end(), e.region) ==
            config.regions->end()) {
      return true;
    }
    for (const auto& mask : config.exclude) {
      if ((mask.region.empty() || mask.region == e.region) && mask.year == e.year &&
          std::find(mask.months.begin(), mask.months.end(), e.month) != mask.months.end()) {
        return true;
      }
    }
    return false;
  };
  std::erase_if(entries, excluded);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.year, a.month, a.region) < std::tie(b.year, b.month, b.region);
  });
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.id).second) throw DataError("split_manifest: duplicate sample id " + e.id);
  }

  std::set<std::pair<int, int>> early_months;
  for (const auto& e : entries) {
    if (e.year < config.test_start_year) early_months.insert({e.year, e.month});
  }
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(config.val_fraction * static_cast<double>(early_months.size())));
  if (config.val_fraction > 0.0 && n_val == 0 && early_months.size() > 1) n_val = 1;
  n_val = std::min(n_val, early_months.size());
  std::set<std::pair<int, int>> val_months;
  for (auto it = early_months.rbegin(); val_months.size() < n_val; ++it) val_months.insert(*it);

  bool any_train = false;
  for (auto& e : entries) {
    if (e.year >= config.test_start_year) {
      e.split = Split::test;
    } else if (val_months.count({e.year, e.month})) {
      e.split = Split::val;
    } else {
      e.split = Split::train;
      any_train = true;
    }
  }
  if (!any_train) throw DataError("split_manifest: training split is empty");
  return entries;
}

std::vector<const ManifestEntry*> DatasetManifest::in_split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

void check_manifest(const DatasetManifest& manifest, int test_start_year) {
  std::set<std::string> ids;
  for (const auto& e : manifest.entries) {
    if (!ids.insert(e.id).second) {
      throw DataError("manifest: sample " + e.id + " appears more than once");
    }
    if (e.split == Split::test && e.year < test_start_year) {
      throw DataError("manifest: test sample " + e.id + " predates " +
                      std::to_string(test_start_year));
    }
    if (e.split != Split::test && e.year >= test_start_year) {
      throw DataError("manifest: " + std::string(to_string(e.split)) + " sample " + e.id +
                      " is not before " + std::to_string(test_start_year));
    }
  }
}

// ---------------------------------------------------------------------------
// Manifest files

namespace {

namespace fs = std::filesystem;

constexpr const char* kManifestFile = "manifest.jsonl";
constexpr const char* kDatasetFile = "dataset.json";

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

}  // namespace

void write_manifest(const DatasetManifest& manifest, const std::string& dir) {
  ensure_dir(dir);
  {
    std::ofstream out(fs::path(dir) / kManifestFile, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in '" + dir + "'");
    for (const auto& e : manifest.entries) {
      const nlohmann::json rec = {{"id", e.id},         {"year", e.year},
                                  {"month", e.month},   {"region", e.region},
                                  {"split", to_string(e.split)}, {"files", e.files}};
      out << rec.dump() << "\n";
    }
  }
  const nlohmann::json meta = {
      {"scale", manifest.scale},
      {"seed", manifest.seed},
      {"degradation", to_string(manifest.degradation)},
      {"test_start_year", manifest.test_start_year},
      {"normalization",
       {{"fire_cap", manifest.norm.fire_cap}, {"temp_halfrange", manifest.norm.temp_halfrange}}},
  };
  std::ofstream out(fs::path(dir) / kDatasetFile, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset.json in '" + dir + "'");
  out << meta.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string& dir) {
  DatasetManifest m;
  const fs::path meta_path = fs::path(dir) / kDatasetFile;
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw IoError("cannot open '" + meta_path.string() + "'");
  try {
    const auto meta = nlohmann::json::parse(meta_in);
    m.scale = meta.at("scale").get<int>();
    m.seed = meta.value("seed", std::uint64_t{0});
    m.degradation = degradation_from_string(meta.value("degradation", std::string("block_average")));
    m.norm.fire_cap = meta.at("normalization").at("fire_cap").get<double>();
    m.norm.temp_halfrange = meta.at("normalization").at("temp_halfrange").get<double>();
    m.test_start_year = meta.value("test_start_year", 2017);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }

  const fs::path manifest_path = fs::path(dir) / kManifestFile;
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open '" + manifest_path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = rec.at("id").get<std::string>();
      e.year = rec.at("year").get<int>();
      e.month = rec.at("month").get<int>();
      e.region = rec.at("region").get<std::string>();
      e.split = split_from_string(rec.at("split").get<std::string>());
      e.files = rec.at("files").get<std::map<std::string, std::string>>();
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(manifest_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  check_manifest(m, m.test_start_year);
  return m;
}

std::map<std::string, std::string> write_sample(const Sample& sample, const std::string& dir) {
  ensure_dir(fs::path(dir) / "samples");
  const std::string id = sample.info.id();
  std::map<std::string, std::string> files = {
      {"fire_lr", "samples/" + id + "_fire_lr.fsr"},
      {"temp_dev_lr", "samples/" + id + "_temp_dev_lr.fsr"},
      {"burnable_lr", "samples/" + id + "_burnable_lr.fsr"},
      {"fire_hr", "samples/" + id + "_fire_hr.fsr"},
  };
  write_raster(sample.lr_input.channel(ChannelRole::fire), (fs::path(dir) / files["fire_lr"]).string());
  write_raster(sample.lr_input.channel(ChannelRole::temp_dev),
               (fs::path(dir) / files["temp_dev_lr"]).string());
  write_raster(sample.lr_input.channel(ChannelRole::burnable),
               (fs::path(dir) / files["burnable_lr"]).string());
  write_raster(sample.hr_target, (fs::path(dir) / files["fire_hr"]).string());
  return files;
}

Sample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry,
                   const std::string& dir) {
  auto path_of = [&](const char* role) {
    const auto it = entry.files.find(role);
    if (it == entry.files.end()) {
      throw DataError("manifest entry " + entry.id + " has no '" + role + "' file");
    }
    return (fs::path(dir) / it->second).string();
  };
  std::vector<Raster> lr;
  lr.push_back(read_raster(path_of("fire_lr")));
  lr.push_back(read_raster(path_of("temp_dev_lr")));
  lr.push_back(read_raster(path_of("burnable_lr")));
  Raster hr = read_raster(path_of("fire_hr"));
  ChannelStack stack(std::move(lr), {std::begin(kInputRoles), std::end(kInputRoles)});
  const auto s = static_cast<std::size_t>(manifest.scale);
  if (hr.width() != stack.width() * s || hr.height() != stack.height() * s) {
    throw DataError("sample " + entry.id + ": HR target " + std::to_string(hr.width()) + "x" +
                    std::to_string(hr.height()) + " is not LR dims x " +
                    std::to_string(manifest.scale));
  }
  return Sample{std::move(stack), std::move(hr), SampleInfo{entry.year, entry.month, entry.region},
                manifest.scale};
}

std::vector<Sample> load_split(const DatasetManifest& manifest, Split split,
                               const std::string& dir) {
  std::vector<Sample> out;
  for (const auto* e : manifest.in_split(split)) out.push_back(load_sample(manifest, *e, dir));
  return out;
}

}  // namespace firesr
