// firesr: dataset construction, training, evaluation and inference for FireSRnet.
//
// Exit codes: 0 ok, 1 usage, 2 data/format, 3 numeric, 4 I/O.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "firesr/dataset.hpp"
#include "firesr/error.hpp"
#include "firesr/evaluation.hpp"
#include "firesr/network.hpp"
#include "firesr/raster_io.hpp"
#include "firesr/synth.hpp"
#include "firesr/training.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace firesr::cli {
namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write '" + p.string() + "'");
  f << text;
}

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("--") + flag + " is required");
  return value;
}

// Options shared by every subcommand.
struct Common {
  std::string config;
  std::uint64_t seed = 0;
  int scale = 4;
  std::string out;
  unsigned threads = 1;
  double threshold = kDefaultFireThreshold;
};

void add_config_flag(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file; flags override its values");
}

struct NormOptions {
  double fire_cap = 254.0;
  double temp_halfrange = 10.0;

  void add(CLI::App* app, RunConfig& rc) {
    rc.add(app, "fire-cap", fire_cap, "Fire counts saturating the normalized fire channel");
    rc.add(app, "temp-halfrange", temp_halfrange, "Temperature deviation (degC) mapped to +-1");
  }
  NormalizationSpec spec() const {
    NormalizationSpec n{fire_cap, temp_halfrange};
    n.validate();
    return n;
  }
};

// ---------------------------------------------------------------------------
// synth

struct SynthCmd {
  Common common;
  RunConfig rc{"synth"};
  SynthConfig gen;
  NormOptions norm;
  std::string regions = "US";
  double val_fraction = 0.15;
  int test_start_year = 2017;

  void setup(CLI::App* app) {
    add_config_flag(app, common);
    rc.add(app, "seed", common.seed, "Generator seed");
    rc.add(app, "scale", common.scale, "Super-resolution factor (2, 4 or 8)");
    rc.add(app, "out", common.out, "Output dataset directory");
    rc.add(app, "months", gen.n_months, "Number of consecutive months");
    rc.add(app, "width", gen.hr_width, "HR width in pixels");
    rc.add(app, "height", gen.hr_height, "HR height in pixels");
    rc.add(app, "start-year", gen.start_year, "Year of the first month");
    rc.add(app, "start-month", gen.start_month, "Calendar month of the first month");
    rc.add(app, "regions", regions, "Comma-separated region labels");
    rc.add(app, "val-fraction", val_fraction, "Chronological tail of pre-test months used for validation");
    rc.add(app, "test-start-year", test_start_year, "First year of the test split");
    rc.add(app, "seasonal-amplitude", gen.seasonal_amplitude, "degC");
    rc.add(app, "anomaly-amplitude", gen.anomaly_amplitude, "degC");
    rc.add(app, "warming-per-year", gen.warming_per_year, "degC per year");
    rc.add(app, "blob-density", gen.blob_density, "Fire candidates per HR pixel per month");
    rc.add(app, "fire-gain", gen.fire_gain, "Counts per unit envelope per unit intensity");
    rc.add(app, "blob-sigma-min", gen.blob_sigma_lr_min, "Smallest fire blob sigma (LR pixels)");
    rc.add(app, "blob-sigma-max", gen.blob_sigma_lr_max, "Largest fire blob sigma (LR pixels)");
    rc.add(app, "burnable-level", gen.burnable_level, "Noise level where burnability starts");
    rc.add(app, "burnable-ramp", gen.burnable_ramp, "Noise span over which burnability rises to 1");
    norm.add(app, rc);
    rc.exclude_from_echo("out");
  }

  int run() {
    rc.resolve(common.config);
    const fs::path out = require(common.out, "out");
    check_scale(common.scale);
    gen.seed = common.seed;
    gen.scale = common.scale;
    gen.regions = split_list(regions);
    gen.norm = norm.spec();
    if (gen.regions.empty()) throw UsageError("--regions must name at least one region");
    ensure_dir(out);

    DatasetManifest manifest;
    manifest.scale = common.scale;
    manifest.norm = gen.norm;
    manifest.seed = common.seed;
    for (const auto& m : synth_generate_raw(gen)) {
      const Sample s = build_sample(m.fire_counts, m.temp_dev, m.burnable, gen.scale, gen.norm, m.info);
      ManifestEntry e;
      e.id = m.info.id();
      e.year = m.info.year;
      e.month = m.info.month;
      e.region = m.info.region;
      e.files = write_sample(s, out.string());
      manifest.entries.push_back(std::move(e));
    }
    SplitConfig split;
    split.val_fraction = val_fraction;
    split.test_start_year = test_start_year;
    manifest.entries = split_manifest(manifest.entries, split);
    manifest.test_start_year = test_start_year;
    write_manifest(manifest, out.string());

    json sidecar = rc.effective();
    sidecar["seed"] = common.seed;
    write_text(out / "synth.json", sidecar.dump(2) + "\n");
    write_run_manifest(rc, out, common.seed, {}, {"manifest.jsonl", "dataset.json", "synth.json", "samples/"});

    std::size_t counts[3] = {0, 0, 0};
    for (const auto& e : manifest.entries) ++counts[static_cast<int>(e.split)];
    std::cout << "seed " << common.seed << ": wrote " << manifest.entries.size() << " samples ("
              << counts[0] << " train, " << counts[1] << " val, " << counts[2] << " test) to "
              << out.string() << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------------------
// build-dataset

struct BuildCmd {
  Common common;
  RunConfig rc{"build-dataset"};
  NormOptions norm;
  double val_fraction = 0.15;
  int test_start_year = 2017;
  std::string degradation = "block_average";
  int clim_start = 2000;
  int clim_end = 2019;
  std::string clim_mode = "per_calendar_month";

  void setup(CLI::App* app) {
    add_config_flag(app, common);
    rc.add(app, "seed", common.seed, "Recorded in the manifest");
    rc.add(app, "scale", common.scale, "Super-resolution factor (2, 4 or 8)");
    rc.add(app, "out", common.out, "Output dataset directory");
    rc.add(app, "val-fraction", val_fraction, "Chronological tail of pre-test months used for validation");
    rc.add(app, "test-start-year", test_start_year, "First year of the test split");
    rc.add(app, "degradation", degradation, "HR to LR operator: block_average, decimate, gaussian_blur");
    rc.add(app, "climatology-start", clim_start, "First climatology year");
    rc.add(app, "climatology-end", clim_end, "Last climatology year");
    rc.add(app, "climatology-mode", clim_mode, "per_calendar_month or all_months");
    norm.add(app, rc);
    rc.exclude_from_echo("out");
  }

  struct Source {
    int year, month;
    std::string path;
  };

  static std::vector<Source> series(const json& j, const fs::path& base, const char* what) {
    std::vector<Source> out;
    if (!j.is_array()) throw UsageError(std::string("sources.") + what + " must be an array");
    for (const auto& item : j) {
      out.push_back({item.at("year").get<int>(), item.at("month").get<int>(),
                     (base / item.at("path").get<std::string>()).string()});
    }
    return out;
  }

  int run() {
    rc.resolve(common.config);
    if (common.config.empty()) throw UsageError("build-dataset needs --config describing the sources");
    const fs::path out = require(common.out, "out");
    check_scale(common.scale);
    const NormalizationSpec ns = norm.spec();
    const Degradation deg = degradation_from_string(degradation);
    const ClimatologyWindow window{clim_start, clim_end, climatology_mode_from_string(clim_mode)};

    json file;
    {
      std::ifstream in(common.config);
      file = json::parse(in);
    }
    const fs::path base = fs::path(common.config).parent_path();
    if (!file.contains("sources") || !file["sources"].is_array()) {
      throw UsageError("config has no \"sources\" array");
    }
    GeoTransform csv_geo;
    if (file.contains("csv_grid")) {
      const auto& g = file["csv_grid"];
      csv_geo = {g.value("origin_lon", 0.0), g.value("origin_lat", 0.0), g.value("pixel_size", 0.1)};
    }
    SplitConfig split;
    split.val_fraction = val_fraction;
    split.test_start_year = test_start_year;
    if (file.contains("regions")) split.regions = file["regions"].get<std::vector<std::string>>();
    for (const auto& m : file.value("exclude", json::array())) {
      split.exclude.push_back({m.value("region", std::string()), m.at("year").get<int>(),
                               m.at("months").get<std::vector<int>>()});
    }

    ensure_dir(out);
    DatasetManifest manifest;
    manifest.scale = common.scale;
    manifest.norm = ns;
    manifest.seed = common.seed;
    manifest.degradation = deg;
    std::vector<std::string> inputs;
    std::size_t nodata_total = 0;

    for (const auto& src : file["sources"]) {
      const std::string region = src.at("region").get<std::string>();
      const std::string lc_path = (base / src.at("landcover").get<std::string>()).string();
      inputs.push_back(lc_path);
      const std::string mapping_name = src.value("landcover_mapping", region);
      const LandcoverMapping mapping =
          mapping_name.size() > 5 && mapping_name.substr(mapping_name.size() - 5) == ".json"
              ? load_landcover_mapping((base / mapping_name).string())
              : default_landcover_mapping(mapping_name);

      const auto fire = series(src.at("fire"), base, "fire");
      const auto temp = series(src.at("temperature"), base, "temperature");
      const std::string kind = src.value("temperature_kind", std::string("absolute"));
      if (kind != "absolute" && kind != "deviation") {
        throw UsageError("temperature_kind must be 'absolute' or 'deviation'");
      }

      std::vector<MonthlyRaster> temps;
      for (const auto& t : temp) {
        inputs.push_back(t.path);
        Raster r = read_raster_any(t.path, csv_geo);
        std::size_t n = 0;
        r = r.with_nodata_zeroed(&n);
        nodata_total += n;
        temps.push_back({t.year, t.month, std::move(r)});
      }
      if (kind == "absolute") temps = temp_deviation(temps, window);
      std::map<std::pair<int, int>, const Raster*> by_month;
      for (const auto& t : temps) by_month[{t.year, t.month}] = &t.raster;

      std::optional<Raster> burnable;
      for (const auto& f : fire) {
        inputs.push_back(f.path);
        std::size_t n = 0;
        const Raster counts = read_raster_any(f.path, csv_geo).with_nodata_zeroed(&n);
        nodata_total += n;
        const auto it = by_month.find({f.year, f.month});
        if (it == by_month.end()) {
          throw DataError("region " + region + ": no temperature raster for " +
                          SampleInfo{f.year, f.month, region}.id());
        }
        if (!burnable) {
          burnable = burnable_index(read_raster_any(lc_path, csv_geo), mapping, counts.width(),
                                    counts.height());
        }
        const Sample s = build_sample(counts, *it->second, *burnable, common.scale, ns,
                                      SampleInfo{f.year, f.month, region}, deg);
        ManifestEntry e;
        e.id = s.info.id();
        e.year = f.year;
        e.month = f.month;
        e.region = region;
        e.files = write_sample(s, out.string());
        manifest.entries.push_back(std::move(e));
      }
    }
    manifest.entries = split_manifest(manifest.entries, split);
    manifest.test_start_year = test_start_year;
    write_manifest(manifest, out.string());
    write_run_manifest(rc, out, common.seed, inputs, {"manifest.jsonl", "dataset.json", "samples/"});
    if (nodata_total > 0) {
      std::cerr << "warning: " << nodata_total << " nodata pixels were replaced by 0\n";
    }
    std::cout << "wrote " << manifest.entries.size() << " samples to " << out.string() << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------------------
// train

struct TrainCmd {
  Common common;
  RunConfig rc{"train"};
  std::string data;
  std::string resume;
  std::string regions;
  TrainConfig tc;
  std::size_t crop = 128;
  std::size_t c1 = 16, c2 = 8, c3 = 8;
  int checkpoint_every = 0;
  bool quiet = false;

  void setup(CLI::App* app) {
    common.scale = 0;
    add_config_flag(app, common);
    rc.add(app, "data", data, "Dataset directory (manifest.jsonl + dataset.json)");
    rc.add(app, "seed", common.seed, "Initialization, shuffling and crop seed");
    rc.add(app, "scale", common.scale, "Expected scale (0: take it from the dataset)");
    rc.add(app, "out", common.out, "Output directory");
    rc.add(app, "threads", common.threads, "Worker threads for per-sample gradients");
    rc.add(app, "learning-rate", tc.adam.learning_rate, "Adam step size");
    rc.add(app, "beta1", tc.adam.beta1, "Adam first-moment decay");
    rc.add(app, "beta2", tc.adam.beta2, "Adam second-moment decay");
    rc.add(app, "epsilon", tc.adam.epsilon, "Adam epsilon");
    rc.add(app, "batch-size", tc.batch_size, "Samples per optimizer step");
    rc.add(app, "epochs", tc.max_epochs, "Maximum number of epochs");
    rc.add(app, "patience", tc.patience, "Epochs without validation improvement before stopping");
    rc.add(app, "crop", crop, "HR crop edge in pixels (0: full images)");
    rc.add(app, "c1", c1, "conv9 output channels");
    rc.add(app, "c2", c2, "conv5 output channels");
    rc.add(app, "c3", c3, "conv3 output channels");
    rc.add(app, "regions", regions, "Train only on these comma-separated regions");
    rc.add(app, "checkpoint-every", checkpoint_every, "Also checkpoint every N epochs (0: only at the end)");
    app->add_option("--resume", resume, "Continue from a checkpoint file");
    app->add_flag("--quiet", quiet, "No per-epoch progress on stderr");
    rc.exclude_from_echo("out");
    rc.exclude_from_echo("threads");
  }

  int run() {
    rc.resolve(common.config);
    const fs::path out = require(common.out, "out");
    require(data, "data");
    DatasetManifest manifest = read_manifest(data);
    if (common.scale != 0 && common.scale != manifest.scale) {
      throw DataError("dataset '" + data + "' was built at " + std::to_string(manifest.scale) +
                      "x but --scale " + std::to_string(common.scale) + " was requested");
    }
    if (!regions.empty()) {
      const auto keep = split_list(regions);
      std::erase_if(manifest.entries, [&](const ManifestEntry& e) {
        return std::find(keep.begin(), keep.end(), e.region) == keep.end();
      });
    }
    tc.seed = common.seed;
    tc.threads = common.threads;
    tc.crop_size = crop == 0 ? std::nullopt : std::optional<std::size_t>(crop);
    tc.channels = {c1, c2, c3};
    ensure_dir(out);

    std::optional<TrainerState> resume_state;
    if (!resume.empty()) resume_state = load_checkpoint(resume);

    TrainHooks hooks;
    hooks.on_epoch_end = [&](const TrainerState& st) {
      const LogRow& r = st.log.back();
      if (!quiet) {
        std::fprintf(stderr, "epoch %4d  train %.6g  val %.6g  %.2fs%s\n", r.epoch, r.train_loss,
                     r.val_loss, r.seconds, r.best ? "  *" : "");
      }
      if (checkpoint_every > 0 && r.epoch > 0 && r.epoch % checkpoint_every == 0) {
        save_checkpoint(st, (out / "checkpoint.fsrc").string());
      }
      return true;
    };
    const TrainResult res =
        train(manifest, data, manifest.scale, tc, hooks, resume_state ? &*resume_state : nullptr);
    save_weights(res.weights, (out / "weights.fsrw").string());
    write_training_log(res.state.log, (out / "training_log.csv").string());
    save_checkpoint(res.state, (out / "checkpoint.fsrc").string());
    std::vector<std::string> inputs = {data};
    if (!resume.empty()) inputs.push_back(resume);
    write_run_manifest(rc, out, common.seed, inputs,
                       {"weights.fsrw", "training_log.csv", "checkpoint.fsrc"});
    std::cout << "best val loss " << res.state.best_val_loss << " at epoch " << res.state.best_epoch
              << " of " << res.state.epoch << "; weights in " << (out / "weights.fsrw").string()
              << "\n";
    return 0;
  }
};

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateCmd {
  Common common;
  RunConfig rc{"evaluate"};
  std::string data;
  std::vector<std::string> weights;
  std::vector<std::string> region_models;
  std::string predictions;
  std::string name = "Predictions";

  void setup(CLI::App* app) {
    add_config_flag(app, common);
    rc.add(app, "data", data, "Dataset directory");
    rc.add(app, "weights", weights, "FireSRnet weights file(s); each adds a FireSRnet and a Bicubic row");
    rc.add(app, "region-model", region_models,
           "REGIONS=weights, e.g. US=us.fsrw or US,AUS=both.fsrw; each adds a region row");
    rc.add(app, "predictions", predictions, "Directory of <sample id>.fsr predictions to score");
    rc.add(app, "name", name, "Row label for --predictions");
    rc.add(app, "threshold", common.threshold, "Binarization threshold in normalized units");
    rc.add(app, "out", common.out, "Output directory for report.txt / report.csv");
    rc.exclude_from_echo("out");
  }

  int run() {
    rc.resolve(common.config);
    require(data, "data");
    if (weights.empty() && region_models.empty() && predictions.empty()) {
      throw UsageError("give at least one of --weights, --region-model, --predictions");
    }
    const DatasetManifest manifest = read_manifest(data);
    const auto test = load_split(manifest, Split::test, data);
    if (test.empty()) throw DataError("dataset '" + data + "' has no test samples");

    std::vector<EvalReport> reports;
    std::vector<std::string> inputs = {data};
    if (!weights.empty()) {
      std::vector<NetworkWeights> nets;
      for (const auto& w : weights) {
        nets.push_back(load_weights(w));
        inputs.push_back(w);
      }
      for (const auto& n : nets) {
        if (n.scale != manifest.scale) {
          throw DataError("network scale " + std::to_string(n.scale) +
                          "x does not match dataset scale " + std::to_string(manifest.scale) + "x");
        }
      }
      reports = evaluate_models(test, nets, common.threshold);
    }
    if (!region_models.empty()) {
      std::vector<RegionModel> models;
      for (const auto& spec : region_models) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) {
          throw UsageError("--region-model expects REGIONS=weights, got '" + spec + "'");
        }
        models.push_back({split_list(spec.substr(0, eq)), load_weights(spec.substr(eq + 1))});
        inputs.push_back(spec.substr(eq + 1));
      }
      for (auto& r : evaluate_region_models(test, models, common.threshold)) reports.push_back(r);
    }
    if (!predictions.empty()) {
      std::vector<Raster> preds, targets;
      for (const auto& s : test) {
        preds.push_back(read_raster((fs::path(predictions) / (s.info.id() + ".fsr")).string()));
        targets.push_back(s.hr_target);
      }
      inputs.push_back(predictions);
      reports.push_back(evaluate_predictions(name, manifest.scale, preds, targets, common.threshold));
    }

    const std::string table = format_report_table(reports);
    std::cout << table;
    if (!common.out.empty()) {
      const fs::path out = common.out;
      ensure_dir(out);
      write_text(out / "report.txt", table);
      write_text(out / "report.csv", format_report_csv(reports));
      write_run_manifest(rc, out, common.seed, inputs, {"report.txt", "report.csv"});
    }
    return 0;
  }
};

// ---------------------------------------------------------------------------
// infer

struct InferCmd {
  Common common;
  RunConfig rc{"infer"};
  NormOptions norm;
  std::string weights;
  std::string data;
  std::string sample;
  std::string fire, temp, burnable;
  std::size_t lr_width = 0, lr_height = 0;
  double fire_divisor = 100.0;

  void setup(CLI::App* app) {
    add_config_flag(app, common);
    rc.add(app, "weights", weights, "FireSRnet weights file");
    rc.add(app, "out", common.out, "Output directory");
    rc.add(app, "data", data, "Dataset directory (with --sample)");
    rc.add(app, "sample", sample, "Sample id to super-resolve, e.g. US-2018-08");
    rc.add(app, "threshold", common.threshold, "Binarization threshold for the per-sample metrics");
    rc.add(app, "fire", fire, "Coarse fire-like field (FSR or CSV), e.g. burned area in percent");
    rc.add(app, "temp", temp, "Coarse temperature deviation field (degC)");
    rc.add(app, "burnable", burnable, "Burnable land index in [0, 1]");
    rc.add(app, "lr-width", lr_width, "LR grid width the coarse fields are regridded to");
    rc.add(app, "lr-height", lr_height, "LR grid height the coarse fields are regridded to");
    rc.add(app, "fire-divisor", fire_divisor, "Divides the coarse fire field into [0, 1]");
    norm.add(app, rc);
    rc.exclude_from_echo("out");
  }

  int run() {
    rc.resolve(common.config);
    const fs::path out = require(common.out, "out");
    const NetworkWeights net = load_weights(require(weights, "weights"));
    ensure_dir(out);
    if (!sample.empty()) return run_sample(net, out);
    if (fire.empty() || temp.empty() || burnable.empty()) {
      throw UsageError("infer needs either --data and --sample, or --fire, --temp and --burnable");
    }
    if (lr_width == 0 || lr_height == 0) throw UsageError("--lr-width and --lr-height are required");
    CoarseInferenceOptions opt;
    opt.fire_divisor = fire_divisor;
    opt.norm = norm.spec();
    const Raster sr = infer_coarse(net, read_raster_any(fire), read_raster_any(temp),
                                   read_raster_any(burnable), lr_width, lr_height, opt);
    write_raster(sr, (out / "sr.fsr").string());
    write_pgm(sr, (out / "sr.pgm").string());
    write_run_manifest(rc, out, common.seed, {weights, fire, temp, burnable}, {"sr.fsr", "sr.pgm"});
    std::cout << "wrote " << sr.width() << "x" << sr.height() << " SR map to "
              << (out / "sr.fsr").string() << "\n";
    return 0;
  }

  int run_sample(const NetworkWeights& net, const fs::path& out) {
    require(data, "data");
    const DatasetManifest manifest = read_manifest(data);
    const ManifestEntry* entry = nullptr;
    for (const auto& e : manifest.entries) {
      if (e.id == sample) entry = &e;
    }
    if (!entry) throw DataError("sample '" + sample + "' is not in dataset '" + data + "'");
    if (net.scale != manifest.scale) {
      throw DataError("network scale " + std::to_string(net.scale) + "x does not match dataset scale " +
                      std::to_string(manifest.scale) + "x");
    }
    const Sample s = load_sample(manifest, *entry, data);
    const Raster sr = forward(net, s.lr_input);
    const std::string stem = sample + "_sr";
    write_raster(sr, (out / (stem + ".fsr")).string());
    write_pgm(sr, (out / (stem + ".pgm")).string());
    export_triptych(s, net, (out / (sample + "_triptych.ppm")).string());
    const auto tag = std::to_string(net.scale) + "x";
    std::vector<EvalReport> rows = {
        evaluate_predictions("FireSRnet-" + tag, net.scale, {sr}, {s.hr_target}, common.threshold),
        evaluate_predictions("Bicubic-" + tag, net.scale,
                             {bicubic_baseline(s.lr_input.channel(ChannelRole::fire), net.scale)},
                             {s.hr_target}, common.threshold)};
    std::cout << format_report_table(rows);
    write_run_manifest(rc, out, common.seed, {weights, data},
                       {stem + ".fsr", stem + ".pgm", sample + "_triptych.ppm"});
    return 0;
  }
};

// ---------------------------------------------------------------------------
// export-filters

struct ExportCmd {
  Common common;
  RunConfig rc{"export-filters"};
  std::string weights;
  bool per_channel = false;

  void setup(CLI::App* app) {
    add_config_flag(app, common);
    rc.add(app, "weights", weights, "FireSRnet weights file");
    rc.add(app, "out", common.out, "Output directory for the PGM images");
    rc.add_flag(app, "per-channel", per_channel, "One image per filter and input channel");
    rc.exclude_from_echo("out");
  }

  int run() {
    rc.resolve(common.config);
    const fs::path out = require(common.out, "out");
    const NetworkWeights net = load_weights(require(weights, "weights"));
    const auto paths = export_layer1_filters(
        net, out.string(), per_channel ? FilterExport::per_channel : FilterExport::channel_mean);
    std::vector<std::string> rel;
    for (const auto& p : paths) rel.push_back(fs::path(p).filename().string());
    write_run_manifest(rc, out, common.seed, {weights}, rel);
    std::cout << "wrote " << paths.size() << " filter images to " << out.string() << "\n";
    return 0;
  }
};

}  // namespace
}  // namespace firesr::cli

int main(int argc, char** argv) {
  using namespace firesr::cli;
  CLI::App app{"FireSRnet: super-resolution of monthly fire-exposure rasters"};
  app.set_version_flag("--version", FIRESR_VERSION);
  app.require_subcommand(1);

  SynthCmd synth;
  BuildCmd build;
  TrainCmd train;
  EvaluateCmd evaluate;
  InferCmd infer;
  ExportCmd exporter;
  auto* s_synth = app.add_subcommand("synth", "Generate a seeded synthetic dataset");
  auto* s_build = app.add_subcommand("build-dataset", "Build a dataset from FSR/CSV rasters");
  auto* s_train = app.add_subcommand("train", "Train FireSRnet on a dataset");
  auto* s_eval = app.add_subcommand("evaluate", "Score networks against bicubic on the test split");
  auto* s_infer = app.add_subcommand("infer", "Super-resolve a dataset sample or coarse fields");
  auto* s_export = app.add_subcommand("export-filters", "Write the first-layer filters as PGM images");
  synth.setup(s_synth);
  build.setup(s_build);
  train.setup(s_train);
  evaluate.setup(s_eval);
  infer.setup(s_infer);
  exporter.setup(s_export);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (s_synth->parsed()) return synth.run();
    if (s_build->parsed()) return build.run();
    if (s_train->parsed()) return train.run();
    if (s_eval->parsed()) return evaluate.run();
    if (s_infer->parsed()) return infer.run();
    if (s_export->parsed()) return exporter.run();
  } catch (const firesr::Error& e) {
    static const char* kinds[] = {"", "usage", "data", "numeric", "io"};
    std::cerr << "error (" << kinds[e.exit_code()] << "): " << e.what() << "\n";
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error (usage): malformed configuration: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return 4;
  }
  return 1;
}
