#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "firesr/raster.hpp"

namespace firesr {

/// Interpolation weights along one axis: output index i reads
/// `taps` source samples index[i*taps + k] with weight[i*taps + k].
/// Source indices are already clamped to [0, in_size).
struct AxisKernel {
  std::size_t in_size = 0;
  std::size_t out_size = 0;
  std::size_t taps = 0;
  std::vector<std::size_t> index;
  std::vector<double> weight;
};

/// Half-pixel-center source coordinate of output sample `out_index`.
double source_coordinate(std::size_t out_index, std::size_t in_size, std::size_t out_size);

/// Keys cubic convolution kernel with a = -0.5.
double keys_cubic(double distance);

AxisKernel bilinear_axis(std::size_t in_size, std::size_t out_size);
AxisKernel bicubic_axis(std::size_t in_size, std::size_t out_size);

/// Separable resampling of one row-major plane: horizontal pass first, then vertical.
/// `dst` must hold x.out_size * y.out_size values.
void resample_plane(std::span<const double> src, const AxisKernel& x, const AxisKernel& y,
                    std::span<double> dst);

/// Exact transpose of resample_plane: accumulates into `dst_grad` (size x.in_size * y.in_size).
void resample_plane_adjoint(std::span<const double> out_grad, const AxisKernel& x,
                            const AxisKernel& y, std::span<double> dst_grad);

/// Bilinear resampling with half-pixel centers and edge clamping. Nodata pixels
/// are read as 0 and counted into `nodata_replaced` when given.
Raster bilinear_resample(const Raster& src, std::size_t out_width, std::size_t out_height,
                         std::size_t* nodata_replaced = nullptr);

/// Bicubic (Keys, a = -0.5) resampling with the same conventions as bilinear_resample.
Raster bicubic_resample(const Raster& src, std::size_t out_width, std::size_t out_height,
                        std::size_t* nodata_replaced = nullptr);

/// Mean of each factor x factor block. factor must be 2, 4 or 8 and divide both dims.
Raster block_average_downsample(const Raster& src, std::size_t factor,
                                std::size_t* nodata_replaced = nullptr);

/// HR -> LR degradation operators. Block averaging is the default; the others
/// exist for sensitivity checks.
enum class Degradation { block_average, decimate, gaussian_blur };

Degradation degradation_from_string(std::string_view name);
std::string_view to_string(Degradation method);

/// decimate keeps the pixel at offset (factor/2, factor/2) of each block;
/// gaussian_blur convolves with sigma = factor/2 (clamped edges) and then block-averages.
Raster degrade(const Raster& src, std::size_t factor, Degradation method);

}  // namespace firesr
