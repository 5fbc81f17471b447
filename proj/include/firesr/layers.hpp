#pragma once

// Dense feature-map tensors and the two layer kinds FireSRnet is made of:
// same-padded 2D convolution and 2x bilinear upsampling, each with an exact
// reverse-mode counterpart.

#include <cstddef>
#include <span>
#include <vector>

namespace firesr {

/// channels x height x width, channel-major, row-major planes.
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(std::size_t c, std::size_t h, std::size_t w)
      : channels(c), height(h), width(w), data(c * h * w, 0.0) {}

  std::size_t plane_size() const noexcept { return height * width; }
  std::span<double> plane(std::size_t c) { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(std::size_t c) const {
    return {data.data() + c * plane_size(), plane_size()};
  }
  bool same_shape(const FeatureMap& o) const noexcept {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

/// Parameters and shape of a convolution. Kernels are laid out [out][in][k][k].
struct ConvShape {
  std::size_t kernel_size = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;

  std::size_t kernel_count() const noexcept {
    return out_channels * in_channels * kernel_size * kernel_size;
  }
};

/// out = bias + sum_i K[o][i] (*) in[i] with zero padding of (k-1)/2 on every side.
void conv2d_same(const ConvShape& shape, std::span<const double> kernels,
                 std::span<const double> biases, const FeatureMap& in, FeatureMap& out);

/// Given dL/d(out), accumulates dL/dK and dL/db and, when grad_in is non-null,
/// writes dL/d(in) (overwriting).
void conv2d_same_backward(const ConvShape& shape, std::span<const double> kernels,
                          const FeatureMap& in, const FeatureMap& grad_out,
                          std::span<double> grad_kernels, std::span<double> grad_biases,
                          FeatureMap* grad_in);

void relu_inplace(FeatureMap& x);

/// Zeroes grad wherever the ReLU output was not positive.
void relu_backward_inplace(const FeatureMap& relu_out, FeatureMap& grad);

/// 2x bilinear upsampling per channel (half-pixel centers, edge clamping).
FeatureMap upsample2x(const FeatureMap& in);

/// Transpose of upsample2x.
FeatureMap upsample2x_backward(const FeatureMap& grad_out);

}  // namespace firesr
