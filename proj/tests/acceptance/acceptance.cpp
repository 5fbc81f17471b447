// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero on any FAIL.
//
//   firesr_acceptance            all criteria
//   firesr_acceptance 2 6        only the listed criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../gradcheck.hpp"
#include "../test_util.hpp"
#include "firesr/dataset.hpp"
#include "firesr/evaluation.hpp"
#include "firesr/layers.hpp"
#include "firesr/metrics.hpp"
#include "firesr/network.hpp"
#include "firesr/raster_io.hpp"
#include "firesr/resample.hpp"
#include "firesr/synth.hpp"
#include "firesr/training.hpp"

using namespace firesr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "first failure: " << what << "; ";
      pass = false;
    }
  }
};

unsigned worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

FeatureMap random_map(std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
  FeatureMap m(c, h, w);
  for (double& v : m.data) v = rng.uniform(-1, 1);
  return m;
}

// 1 --------------------------------------------------------------------------
void parameter_count(Outcome& o) {
  std::size_t counts[3];
  int i = 0;
  for (int s : {2, 4, 8}) counts[i++] = build_network(s, {16, 8, 8}).parameter_count();
  o.detail << "counts " << counts[0] << "/" << counts[1] << "/" << counts[2];
  for (auto c : counts) o.check(c == 7705, "count != 7705");
}

// 2 --------------------------------------------------------------------------
void gradients(Outcome& o) {
  for (int s : {2, 4, 8}) {
    const auto r = test::gradient_check(build_network(s, {16, 8, 8}, 100 + s), 8, 200 + s);
    o.detail << s << "x: " << r.checked << " params, worst error/tolerance " << r.worst_ratio
             << ", worst rel error where |g| >= 1e-2 " << r.worst_rel_large << "; ";
    o.check(r.checked == 7705, std::to_string(s) + "x checked " + std::to_string(r.checked));
    o.check(r.failures == 0, std::to_string(s) + "x " + r.first_failure);
  }
}

// 3 --------------------------------------------------------------------------
void adjoints(Outcome& o) {
  Rng rng(31);
  double worst = 0;
  for (std::size_t k : {1u, 3u, 5u, 9u}) {
    const ConvShape shape{k, 3, 5};
    std::vector<double> kern(shape.kernel_count()), bias(5, 0.0);
    for (double& v : kern) v = rng.uniform(-1, 1);
    const FeatureMap x = random_map(3, 9, 7, rng);
    const FeatureMap g = random_map(5, 9, 7, rng);
    FeatureMap y, dx;
    conv2d_same(shape, kern, bias, x, y);
    std::vector<double> dk(kern.size()), db(5);
    conv2d_same_backward(shape, kern, x, g, dk, db, &dx);
    worst = std::max(worst, std::fabs(dot(y.data, g.data) - dot(x.data, dx.data)));
    worst = std::max(worst, std::fabs(dot(y.data, g.data) - dot(kern, dk)));
  }
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{1, 1}, {5, 4}, {8, 8}, {3, 11}}) {
    const FeatureMap x = random_map(4, h, w, rng);
    const FeatureMap g = random_map(4, 2 * h, 2 * w, rng);
    worst = std::max(worst, std::fabs(dot(upsample2x(x).data, g.data) -
                                      dot(x.data, upsample2x_backward(g).data)));
  }
  o.detail << "worst |<Ax,y> - <x,A'y>| = " << worst;
  o.check(worst <= 1e-10, "adjoint mismatch");
}

// 4 --------------------------------------------------------------------------
void metric_oracle(Outcome& o) {
  const auto map2x2 = [](unsigned bits) {
    BinaryFireMap m{2, 2, std::vector<std::uint8_t>(4), 0.0};
    for (unsigned i = 0; i < 4; ++i) m.bits[i] = (bits >> i) & 1u;
    return m;
  };
  int cases = 0;
  for (unsigned p = 0; p < 16; ++p) {
    for (unsigned t = 0; t < 16; ++t) {
      std::uint64_t tp = 0, fp = 0, fn = 0;
      for (unsigned i = 0; i < 4; ++i) {
        const bool pi = (p >> i) & 1u, ti = (t >> i) & 1u;
        tp += pi && ti;
        fp += pi && !ti;
        fn += !pi && ti;
      }
      const auto ratio = [&](double num, double den) { return den == 0 ? (fn == 0 ? 1.0 : 0.0) : num / den; };
      const auto m = classification_metrics(map2x2(p), map2x2(t));
      const bool ok = m.precision == ratio(double(tp), double(tp + fp)) &&
                      m.f1 == ratio(2.0 * double(tp), double(2 * tp + fp + fn)) &&
                      m.threat == ratio(double(tp), double(tp + fp + fn));
      o.check(ok, "pair " + std::to_string(p) + "/" + std::to_string(t));
      ++cases;
    }
  }
  Confusion c;
  c.tp = 2;
  c.fp = 1;
  c.fn = 1;
  const auto w = classification_metrics(c);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d cases; worked case (%.4f, %.4f, %.4f)", cases, w.precision, w.f1, w.threat);
  o.detail << buf;
  o.check(std::fabs(w.precision - 0.6667) < 5e-5 && std::fabs(w.f1 - 0.6667) < 5e-5 &&
              std::fabs(w.threat - 0.5) < 5e-5,
          "worked case");
}

// 5 --------------------------------------------------------------------------
void resampling(Outcome& o) {
  double worst_ramp = 0;
  for (std::size_t factor : {2u, 4u, 8u}) {
    const std::size_t w = 12, h = 10;
    Raster r(w, h);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) r.at(y, x) = 3.0 + 0.7 * double(x) - 1.3 * double(y);
    const Raster out = bicubic_resample(r, w * factor, h * factor);
    // Edge clamping bends the ramp near the border; the check covers positions whose
    // four taps all fall inside the source.
    for (std::size_t y = 0; y < h * factor; ++y) {
      const double sy = source_coordinate(y, h, h * factor);
      if (sy < 1.0 || sy > double(h) - 3.0) continue;
      for (std::size_t x = 0; x < w * factor; ++x) {
        const double sx = source_coordinate(x, w, w * factor);
        if (sx < 1.0 || sx > double(w) - 3.0) continue;
        const double expect = 3.0 + 0.7 * sx - 1.3 * sy;
        worst_ramp = std::max(worst_ramp, std::fabs(out.at(y, x) - expect) / std::max(1.0, std::fabs(expect)));
      }
    }
  }
  Rng rng(9);
  double worst_mean = 0;
  for (std::size_t f : {2u, 4u, 8u}) {
    Raster r(16 * f, 8 * f);
    for (double& v : r.values()) v = rng.uniform(0, 254);
    const Raster d = block_average_downsample(r, f);
    double a = 0, b = 0;
    for (double v : r.values()) a += v;
    for (double v : d.values()) b += v;
    a /= double(r.size());
    b /= double(d.size());
    worst_mean = std::max(worst_mean, std::fabs(a - b) / std::fabs(a));
  }
  const Raster bl = bilinear_resample(Raster(2, 1, std::vector<double>{0, 1}), 4, 1);
  const std::vector<double> want = {0, 0.25, 0.75, 1};
  const bool bil_ok = std::equal(want.begin(), want.end(), bl.values().begin());
  o.detail << "ramp rel err " << worst_ramp << ", block-average mean rel err " << worst_mean
           << ", bilinear [" << bl.values()[0] << " " << bl.values()[1] << " " << bl.values()[2]
           << " " << bl.values()[3] << "]";
  o.check(worst_ramp <= 1e-12, "bicubic ramp");
  o.check(worst_mean <= 1e-12, "block-average mean");
  o.check(bil_ok, "bilinear example");
}

// 6 --------------------------------------------------------------------------
struct Split3 {
  std::vector<Sample> train, val, test;
};

Split3 synthetic_split(int scale, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.scale = scale;
  cfg.n_months = 168;  // 2005-01 .. 2018-12: 122 train, 22 val, 24 test
  cfg.start_year = 2005;
  cfg.start_month = 1;
  auto samples = synth_generate(cfg);
  std::vector<ManifestEntry> entries;
  for (const auto& s : samples) {
    ManifestEntry e;
    e.id = s.info.id();
    e.year = s.info.year;
    e.month = s.info.month;
    e.region = s.info.region;
    entries.push_back(e);
  }
  entries = split_manifest(entries, SplitConfig{});
  Split3 out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& dst = entries[i].split == Split::train ? out.train
                : entries[i].split == Split::val ? out.val
                                                 : out.test;
    dst.push_back(std::move(samples[i]));
  }
  return out;
}

void ordering(Outcome& o) {
  struct Plan {
    int scale;
    int epochs;
  };
  for (const Plan p : {Plan{2, 30}, Plan{4, 60}, Plan{8, 150}}) {
    const auto t0 = std::chrono::steady_clock::now();
    const Split3 d = synthetic_split(p.scale, 11);
    TrainConfig tc;
    tc.max_epochs = p.epochs;
    tc.patience = p.epochs;
    tc.crop_size = 64;
    tc.batch_size = 8;
    tc.adam.learning_rate = 1e-3;
    tc.seed = 3;
    tc.threads = worker_threads();
    const auto res = train(d.train, d.val, p.scale, tc);
    const auto rows = evaluate_models(d.test, {res.weights});
    const EvalReport& net = rows[0];
    const EvalReport& bic = rows[1];
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%dx (%zu train/%zu test months, %d epochs, %.0fs): RMSE %.4f vs %.4f, precision %.4f vs %.4f; ",
                  p.scale, d.train.size(), d.test.size(), p.epochs, secs, net.rmse, bic.rmse,
                  net.precision, bic.precision);
    o.detail << buf;
    o.check(d.train.size() >= 120 && d.test.size() == 24, "dataset size");
    o.check(net.rmse < bic.rmse, std::to_string(p.scale) + "x RMSE");
    if (p.scale != 2) o.check(net.precision > bic.precision, std::to_string(p.scale) + "x precision");
  }
}

// 7 --------------------------------------------------------------------------
std::map<std::string, std::string> pipeline(const fs::path& dir) {
  SynthConfig cfg;
  cfg.seed = 21;
  cfg.n_months = 40;
  cfg.hr_width = 64;
  cfg.hr_height = 32;
  cfg.start_year = 2015;
  cfg.start_month = 1;
  DatasetManifest manifest;
  manifest.scale = cfg.scale;
  manifest.seed = cfg.seed;
  for (const auto& s : synth_generate(cfg)) {
    ManifestEntry e;
    e.id = s.info.id();
    e.year = s.info.year;
    e.month = s.info.month;
    e.region = s.info.region;
    e.files = write_sample(s, dir.string());
    manifest.entries.push_back(e);
  }
  manifest.entries = split_manifest(manifest.entries, SplitConfig{});
  write_manifest(manifest, dir.string());

  const DatasetManifest back = read_manifest(dir.string());
  TrainConfig tc;
  tc.max_epochs = 6;
  tc.crop_size = 32;
  tc.seed = 4;
  tc.threads = worker_threads();
  const auto res = train(back, dir.string(), back.scale, tc);
  save_weights(res.weights, (dir / "weights.fsrw").string());
  const auto rows = evaluate_models(back, dir.string(), {res.weights});
  test::write_text((dir / "report.txt").string(), format_report_table(rows));
  test::write_text((dir / "report.csv").string(), format_report_csv(rows));

  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = test::read_text(e.path().string());
  }
  return files;
}

void determinism(Outcome& o) {
  test::TempDir a, b;
  const auto fa = pipeline(a.path());
  const auto fb = pipeline(b.path());
  o.detail << fa.size() << " files compared (dataset, weights.fsrw, report.txt, report.csv)";
  o.check(fa.count("weights.fsrw") && fa.count("report.csv"), "outputs missing");
  o.check(fa == fb, "outputs differ");
}

// 8 --------------------------------------------------------------------------
void round_trips(Outcome& o) {
  Rng rng(17);
  Raster r(13, 7, GeoTransform{-124.0, 42.0, 0.1}, -9999.0);
  for (double& v : r.values()) v = static_cast<float>(rng.uniform(-300, 300));
  r.values()[4] = -9999.0;
  const Raster rb = decode_raster(encode_raster(r));
  o.check(rb.width() == r.width() && rb.height() == r.height() && rb.geo() == r.geo() &&
              rb.nodata() == r.nodata() &&
              std::equal(r.values().begin(), r.values().end(), rb.values().begin()),
          "raster");

  const auto net = build_network(8, {16, 8, 8}, 5);
  const std::string wbytes = encode_weights(net);
  o.check(encode_weights(decode_weights(wbytes)) == wbytes, "weights");

  SynthConfig cfg;
  cfg.seed = 6;
  cfg.n_months = 14;
  cfg.hr_width = 32;
  cfg.hr_height = 16;
  cfg.start_year = 2016;
  const auto samples = synth_generate(cfg);
  const std::vector<Sample> tr(samples.begin(), samples.begin() + 10), va(samples.begin() + 10, samples.end());
  TrainConfig tc;
  tc.max_epochs = 5;
  tc.crop_size = 16;
  tc.batch_size = 4;
  tc.seed = 8;
  const auto full = train(tr, va, 4, tc);
  const std::string cbytes = encode_checkpoint(full.state);
  const TrainerState cb = decode_checkpoint(cbytes);
  o.check(encode_checkpoint(cb) == cbytes && cb.adam.step == full.state.adam.step &&
              cb.adam.m.squared_norm() == full.state.adam.m.squared_norm() &&
              cb.adam.v.squared_norm() == full.state.adam.v.squared_norm(),
          "checkpoint");

  test::TempDir dir;
  TrainHooks stop;
  stop.on_epoch_end = [](const TrainerState& s) { return s.epoch < 2; };
  const auto part = train(tr, va, 4, tc, stop);
  save_checkpoint(part.state, dir.path() + "/ck.fsrc");
  const TrainerState loaded = load_checkpoint(dir.path() + "/ck.fsrc");
  const auto resumed = train(tr, va, 4, tc, {}, &loaded);
  // Checkpoints also carry wall-clock seconds per epoch, so compare everything else.
  bool same_log = resumed.state.log.size() == full.state.log.size();
  for (std::size_t i = 0; same_log && i < full.state.log.size(); ++i) {
    same_log = resumed.state.log[i].train_loss == full.state.log[i].train_loss &&
               resumed.state.log[i].val_loss == full.state.log[i].val_loss &&
               resumed.state.log[i].best == full.state.log[i].best;
  }
  o.check(encode_weights(resumed.state.current) == encode_weights(full.state.current) &&
              encode_weights(resumed.weights) == encode_weights(full.weights) &&
              resumed.state.adam.step == full.state.adam.step &&
              resumed.state.adam.m.squared_norm() == full.state.adam.m.squared_norm() &&
              resumed.state.adam.v.squared_norm() == full.state.adam.v.squared_norm() && same_log,
          "resume");
  o.detail << "raster " << encode_raster(r).size() << " B, weights " << wbytes.size()
           << " B, checkpoint " << cbytes.size() << " B; resume after epoch 2 of 5 compared";
}

// 9 --------------------------------------------------------------------------
void coarse_inference(Outcome& o) {
  for (int s : {2, 4, 8}) {
    auto net = build_network(s, {}, 12);
    Rng rng(3);
    for (double& w : net.layers.back().kernels) w = rng.normal(0, 0.2);
    net.layers.back().biases[0] = -0.05;
    const Raster fire(3, 2, std::vector<double>(6, 40.0));
    const Raster temp(5, 4, std::vector<double>(20, 1.5));
    const Raster burn(7, 3, std::vector<double>(21, 0.6));
    CoarseInferenceOptions opt;
    opt.fire_divisor = 100.0;
    const std::size_t lw = 10, lh = 6;
    const ChannelStack in = coarse_input_stack(fire, temp, burn, lw, lh, opt);
    const Raster out = infer_coarse(net, fire, temp, burn, lw, lh, opt);
    bool constant = true;
    for (double v : in.channel(ChannelRole::fire).values()) constant &= v == 0.4;
    for (double v : in.channel(ChannelRole::temp_dev).values()) constant &= v == in.channel(ChannelRole::temp_dev).values()[0];
    for (double v : in.channel(ChannelRole::burnable).values()) constant &= v == 0.6;
    o.check(constant, std::to_string(s) + "x regridded channels not constant");
    o.check(out.width() == lw * s && out.height() == lh * s, std::to_string(s) + "x dims");
    o.check(out.min() >= 0.0, std::to_string(s) + "x negative output");
    o.detail << s << "x -> " << out.width() << "x" << out.height() << " min " << out.min() << "; ";
  }
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> all = {
      {1, "parameter count", parameter_count},
      {2, "gradient correctness", gradients},
      {3, "adjoint identities", adjoints},
      {4, "metric oracle", metric_oracle},
      {5, "resampling oracles", resampling},
      {6, "FireSRnet vs bicubic ordering", ordering},
      {7, "end-to-end determinism", determinism},
      {8, "codec and checkpoint round-trips", round_trips},
      {9, "coarse-input inference", coarse_inference},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s) [%.1fs]: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.str().c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
