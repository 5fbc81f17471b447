#include "firesr/resample.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "firesr/error.hpp"

namespace firesr {

namespace {

std::size_t clamp_index(long long i, std::size_t n) {
  if (i < 0) return 0;
  if (static_cast<std::size_t>(i) >= n) return n - 1;
  return static_cast<std::size_t>(i);
}

void check_out_dims(std::size_t w, std::size_t h) {
  if (w == 0 || h == 0) throw UsageError("resample: output dimensions must be at least 1x1");
}

GeoTransform rescaled_geo(const Raster& src, std::size_t out_width) {
  GeoTransform g = src.geo();
  g.pixel_size = src.geo().pixel_size * static_cast<double>(src.width()) /
                 static_cast<double>(out_width);
  return g;
}

Raster prepared_source(const Raster& src, std::string_view op, std::size_t* nodata_replaced) {
  src.require_finite(op);
  return src.with_nodata_zeroed(nodata_replaced);
}

Raster resample_with(const Raster& src, std::size_t out_width, std::size_t out_height,
                     const AxisKernel& x, const AxisKernel& y, std::string_view op,
                     std::size_t* nodata_replaced) {
  const Raster clean = prepared_source(src, op, nodata_replaced);
  Raster out(out_width, out_height, rescaled_geo(src, out_width));
  resample_plane(clean.values(), x, y, out.values());
  return out;
}

}  // namespace

double source_coordinate(std::size_t out_index, std::size_t in_size, std::size_t out_size) {
  return (static_cast<double>(out_index) + 0.5) *
             (static_cast<double>(in_size) / static_cast<double>(out_size)) -
         0.5;
}

double keys_cubic(double distance) {
  constexpr double a = -0.5;
  const double d = std::abs(distance);
  if (d <= 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
  if (d < 2.0) return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a;
  return 0.0;
}

AxisKernel bilinear_axis(std::size_t in_size, std::size_t out_size) {
  AxisKernel k{in_size, out_size, 2, {}, {}};
  k.index.resize(out_size * 2);
  k.weight.resize(out_size * 2);
  for (std::size_t i = 0; i < out_size; ++i) {
    const double s = source_coordinate(i, in_size, out_size);
    const double base = std::floor(s);
    const double t = s - base;
    const auto b = static_cast<long long>(base);
    k.index[2 * i] = clamp_index(b, in_size);
    k.index[2 * i + 1] = clamp_index(b + 1, in_size);
    k.weight[2 * i] = 1.0 - t;
    k.weight[2 * i + 1] = t;
  }
  return k;
}

AxisKernel bicubic_axis(std::size_t in_size, std::size_t out_size) {
  AxisKernel k{in_size, out_size, 4, {}, {}};
  k.index.resize(out_size * 4);
  k.weight.resize(out_size * 4);
  for (std::size_t i = 0; i < out_size; ++i) {
    const double s = source_coordinate(i, in_size, out_size);
    const double base = std::floor(s);
    const double t = s - base;
    const auto b = static_cast<long long>(base);
    for (int j = 0; j < 4; ++j) {
      k.index[4 * i + j] = clamp_index(b - 1 + j, in_size);
      k.weight[4 * i + j] = keys_cubic(t - static_cast<double>(j - 1));
    }
  }
  return k;
}

void resample_plane(std::span<const double> src, const AxisKernel& x, const AxisKernel& y,
                    std::span<double> dst) {
  const std::size_t w_in = x.in_size, w_out = x.out_size;
  const std::size_t h_in = y.in_size, h_out = y.out_size;
  std::vector<double> tmp(h_in * w_out, 0.0);
  for (std::size_t r = 0; r < h_in; ++r) {
    const double* row = src.data() + r * w_in;
    double* trow = tmp.data() + r * w_out;
    for (std::size_t c = 0; c < w_out; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < x.taps; ++t) {
        acc += x.weight[c * x.taps + t] * row[x.index[c * x.taps + t]];
      }
      trow[c] = acc;
    }
  }
  std::fill(dst.begin(), dst.begin() + static_cast<std::ptrdiff_t>(h_out * w_out), 0.0);
  for (std::size_t r = 0; r < h_out; ++r) {
    double* drow = dst.data() + r * w_out;
    for (std::size_t t = 0; t < y.taps; ++t) {
      const double wt = y.weight[r * y.taps + t];
      const double* trow = tmp.data() + y.index[r * y.taps + t] * w_out;
      for (std::size_t c = 0; c < w_out; ++c) drow[c] += wt * trow[c];
    }
  }
}

void resample_plane_adjoint(std::span<const double> out_grad, const AxisKernel& x,
                            const AxisKernel& y, std::span<double> dst_grad) {
  const std::size_t w_in = x.in_size, w_out = x.out_size;
  const std::size_t h_in = y.in_size, h_out = y.out_size;
  std::vector<double> tmp(h_in * w_out, 0.0);
  for (std::size_t r = 0; r < h_out; ++r) {
    const double* grow = out_grad.data() + r * w_out;
    for (std::size_t t = 0; t < y.taps; ++t) {
      const double wt = y.weight[r * y.taps + t];
      double* trow = tmp.data() + y.index[r * y.taps + t] * w_out;
      for (std::size_t c = 0; c < w_out; ++c) trow[c] += wt * grow[c];
    }
  }
  for (std::size_t r = 0; r < h_in; ++r) {
    const double* trow = tmp.data() + r * w_out;
    double* drow = dst_grad.data() + r * w_in;
    for (std::size_t c = 0; c < w_out; ++c) {
      for (std::size_t t = 0; t < x.taps; ++t) {
        drow[x.index[c * x.taps + t]] += x.weight[c * x.taps + t] * trow[c];
      }
    }
  }
}

Raster bilinear_resample(const Raster& src, std::size_t out_width, std::size_t out_height,
                         std::size_t* nodata_replaced) {
  check_out_dims(out_width, out_height);
  return resample_with(src, out_width, out_height, bilinear_axis(src.width(), out_width),
                       bilinear_axis(src.height(), out_height), "bilinear_resample",
                       nodata_replaced);
}

Raster bicubic_resample(const Raster& src, std::size_t out_width, std::size_t out_height,
                        std::size_t* nodata_replaced) {
  check_out_dims(out_width, out_height);
  return resample_with(src, out_width, out_height, bicubic_axis(src.width(), out_width),
                       bicubic_axis(src.height(), out_height), "bicubic_resample",
                       nodata_replaced);
}

namespace {

void check_factor(const Raster& src, std::size_t factor, std::string_view op) {
  if (factor != 2 && factor != 4 && factor != 8) {
    throw UsageError(std::string(op) + ": factor must be 2, 4 or 8, got " +
                     std::to_string(factor));
  }
  if (src.width() % factor != 0 || src.height() % factor != 0) {
    std::ostringstream os;
    os << op << ": raster " << src.width() << "x" << src.height()
       << " is not divisible by factor " << factor << "; crop it to "
       << (src.width() / factor) * factor << "x" << (src.height() / factor) * factor
       << " first";
    throw DataError(os.str());
  }
}

Raster block_mean(const Raster& clean, std::size_t factor) {
  const std::size_t ow = clean.width() / factor, oh = clean.height() / factor;
  GeoTransform g = clean.geo();
  g.pixel_size *= static_cast<double>(factor);
  Raster out(ow, oh, g);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t dr = 0; dr < factor; ++dr) {
        for (std::size_t dc = 0; dc < factor; ++dc) {
          acc += clean.at(r * factor + dr, c * factor + dc);
        }
      }
      out.at(r, c) = acc * inv;
    }
  }
  return out;
}

}  // namespace

Raster block_average_downsample(const Raster& src, std::size_t factor,
                                std::size_t* nodata_replaced) {
  check_factor(src, factor, "block_average_downsample");
  return block_mean(prepared_source(src, "block_average_downsample", nodata_replaced), factor);
}

Degradation degradation_from_string(std::string_view name) {
  if (name == "block_average") return Degradation::block_average;
  if (name == "decimate") return Degradation::decimate;
  if (name == "gaussian_blur") return Degradation::gaussian_blur;
  throw UsageError("unknown degradation '" + std::string(name) +
                   "' (expected block_average, decimate or gaussian_blur)");
}

std::string_view to_string(Degradation method) {
  switch (method) {
    case Degradation::block_average: return "block_average";
    case Degradation::decimate: return "decimate";
    case Degradation::gaussian_blur: return "gaussian_blur";
  }
  return "unknown";
}

Raster degrade(const Raster& src, std::size_t factor, Degradation method) {
  switch (method) {
    case Degradation::block_average:
      return block_average_downsample(src, factor);
    case Degradation::decimate: {
      check_factor(src, factor, "decimate");
      const Raster clean = prepared_source(src, "decimate", nullptr);
      GeoTransform g = clean.geo();
      g.pixel_size *= static_cast<double>(factor);
      Raster out(clean.width() / factor, clean.height() / factor, g);
      for (std::size_t r = 0; r < out.height(); ++r) {
        for (std::size_t c = 0; c < out.width(); ++c) {
          out.at(r, c) = clean.at(r * factor + factor / 2, c * factor + factor / 2);
        }
      }
      return out;
    }
    case Degradation::gaussian_blur: {
      check_factor(src, factor, "gaussian_blur");
      const Raster clean = prepared_source(src, "gaussian_blur", nullptr);
      const double sigma = 0.5 * static_cast<double>(factor);
      const auto radius = static_cast<long long>(std::ceil(3.0 * sigma));
      std::vector<double> taps;
      double norm = 0.0;
      for (long long d = -radius; d <= radius; ++d) {
        taps.push_back(std::exp(-0.5 * static_cast<double>(d * d) / (sigma * sigma)));
        norm += taps.back();
      }
      for (double& t : taps) t /= norm;
      auto blur_axis = [&](std::size_t n) {
        AxisKernel k{n, n, taps.size(), {}, {}};
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < taps.size(); ++j) {
            k.index.push_back(
                clamp_index(static_cast<long long>(i) + static_cast<long long>(j) - radius, n));
            k.weight.push_back(taps[j]);
          }
        }
        return k;
      };
      Raster blurred(clean.width(), clean.height(), clean.geo());
      resample_plane(clean.values(), blur_axis(clean.width()), blur_axis(clean.height()),
                     blurred.values());
      return block_mean(blurred, factor);
    }
  }
  throw UsageError("unknown degradation method");
}

}  // namespace firesr
