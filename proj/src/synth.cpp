#include "firesr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "firesr/error.hpp"
#include "firesr/random.hpp"
#include "firesr/resample.hpp"

namespace firesr {

namespace {

std::uint64_t region_id(const std::string& region) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : region) h = (h ^ c) * 1099511628211ull;
  return h;
}

GeoTransform region_geo(const std::string& region) {
  if (region == "AUS") return {140.0, -28.0, 0.1};
  return {-124.0, 42.0, 0.1};
}

// Uniform lattice noise with spacing `cell`, bilinearly interpolated to w x h.
Raster lattice_noise(Rng& rng, std::size_t w, std::size_t h, std::size_t cell) {
  const std::size_t cw = std::max<std::size_t>(2, w / cell + 1);
  const std::size_t ch = std::max<std::size_t>(2, h / cell + 1);
  Raster coarse(cw, ch);
  for (double& v : coarse.values()) v = rng.uniform();
  return bilinear_resample(coarse, w, h);
}

Raster smooth_noise(Rng& rng, std::size_t w, std::size_t h) {
  Raster a = lattice_noise(rng, w, h, 16);
  const Raster b = lattice_noise(rng, w, h, 6);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] = 0.65 * av[i] + 0.35 * bv[i];
  return a;
}

}  // namespace

std::vector<SynthMonth> synth_generate_raw(const SynthConfig& cfg) {
  if (cfg.scale != 2 && cfg.scale != 4 && cfg.scale != 8) {
    throw UsageError("synth: scale must be 2, 4 or 8");
  }
  const auto s = static_cast<std::size_t>(cfg.scale);
  if (cfg.hr_width == 0 || cfg.hr_height == 0 || cfg.hr_width % s || cfg.hr_height % s) {
    throw UsageError("synth: HR dims " + std::to_string(cfg.hr_width) + "x" +
                     std::to_string(cfg.hr_height) + " must be positive multiples of scale " +
                     std::to_string(cfg.scale));
  }
  if (cfg.n_months < 1) throw UsageError("synth: n_months must be at least 1");
  if (cfg.start_month < 1 || cfg.start_month > 12) throw UsageError("synth: start_month must be 1-12");
  if (cfg.regions.empty()) throw UsageError("synth: at least one region is required");

  const std::size_t w = cfg.hr_width, h = cfg.hr_height;
  std::vector<SynthMonth> out;
  for (const auto& region : cfg.regions) {
    const std::uint64_t rid = region_id(region);
    const GeoTransform geo = region_geo(region);

    Rng land_rng(derive_seed(cfg.seed, {rid, 1}));
    Raster burnable = smooth_noise(land_rng, w, h);
    for (double& v : burnable.values()) v = std::clamp((v - cfg.burnable_level) / cfg.burnable_ramp, 0.0, 1.0);
    burnable.set_geo(geo);
    const double phase = land_rng.uniform(0.0, 2.0 * std::numbers::pi);

    for (int k = 0; k < cfg.n_months; ++k) {
      const int month_index = (cfg.start_month - 1) + k;
      const int year = cfg.start_year + month_index / 12;
      const int month = month_index % 12 + 1;
      Rng rng(derive_seed(cfg.seed, {rid, 2, static_cast<std::uint64_t>(k)}));

      Raster temp = smooth_noise(rng, w, h);
      temp.set_geo(geo);
      const double seasonal =
          cfg.seasonal_amplitude *
              std::sin(2.0 * std::numbers::pi * (month - 1) / 12.0 + phase) +
          cfg.warming_per_year * (year - 2000);
      for (double& v : temp.values()) v = cfg.anomaly_amplitude * (v - 0.5) * 2.0 + seasonal;

      Raster intensity(w, h, geo);
      for (std::size_t i = 0; i < intensity.size(); ++i) {
        intensity.values()[i] = burnable.values()[i] * std::max(0.0, temp.values()[i]);
      }
      const double i_ref = cfg.seasonal_amplitude + cfg.anomaly_amplitude;

      Raster envelope(w, h, geo);
      const auto candidates = static_cast<std::size_t>(
          std::max(1.0, std::round(cfg.blob_density * static_cast<double>(w * h))));
      for (std::size_t b = 0; b < candidates; ++b) {
        const double cx = rng.uniform(0.0, static_cast<double>(w));
        const double cy = rng.uniform(0.0, static_cast<double>(h));
        const double radius = rng.uniform(cfg.blob_sigma_lr_min, cfg.blob_sigma_lr_max) * static_cast<double>(cfg.scale);
        const double peak = rng.uniform(60.0, 200.0);
        const double accept = rng.uniform();
        const double local = intensity.at(static_cast<std::size_t>(cy), static_cast<std::size_t>(cx));
        if (accept >= local / i_ref) continue;
        const auto reach = static_cast<long long>(std::ceil(3.0 * radius));
        const auto ix = static_cast<long long>(cx), iy = static_cast<long long>(cy);
        for (long long y = std::max(0LL, iy - reach); y <= std::min<long long>(h - 1, iy + reach); ++y) {
          for (long long x = std::max(0LL, ix - reach); x <= std::min<long long>(w - 1, ix + reach); ++x) {
            const double dx = (static_cast<double>(x) + 0.5) - cx;
            const double dy = (static_cast<double>(y) + 0.5) - cy;
            envelope.at(y, x) += peak * std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius));
          }
        }
      }

      Raster fire(w, h, geo);
      for (std::size_t i = 0; i < fire.size(); ++i) {
        const double counts = cfg.fire_gain * envelope.values()[i] * intensity.values()[i];
        fire.values()[i] = std::clamp(std::round(counts), 0.0, 254.0);
      }
      out.push_back({SampleInfo{year, month, region}, std::move(fire), std::move(temp), burnable});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const SynthMonth& a, const SynthMonth& b) {
    return std::tie(a.info.year, a.info.month, a.info.region) <
           std::tie(b.info.year, b.info.month, b.info.region);
  });
  return out;
}

std::vector<Sample> synth_generate(const SynthConfig& config) {
  std::vector<Sample> out;
  for (const auto& m : synth_generate_raw(config)) {
    out.push_back(build_sample(m.fire_counts, m.temp_dev, m.burnable, config.scale, config.norm, m.info));
  }
  return out;
}

}  // namespace firesr
