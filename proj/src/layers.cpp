#include "firesr/layers.hpp"

#include <algorithm>

#include "firesr/resample.hpp"

namespace firesr {

namespace {

// Valid [begin, end) range of output positions for a tap offset d on an axis of length n.
struct Span1 {
  std::size_t begin, end;
};

Span1 valid_range(long long d, std::size_t n) {
  const long long lo = std::max<long long>(0, -d);
  const long long hi = std::min<long long>(static_cast<long long>(n), static_cast<long long>(n) - d);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

void conv2d_same(const ConvShape& shape, std::span<const double> kernels,
                 std::span<const double> biases, const FeatureMap& in, FeatureMap& out) {
  const std::size_t h = in.height, w = in.width, k = shape.kernel_size;
  const long long pad = static_cast<long long>(k / 2);
  if (out.channels != shape.out_channels || out.height != h || out.width != w) {
    out = FeatureMap(shape.out_channels, h, w);
  }
  for (std::size_t o = 0; o < shape.out_channels; ++o) {
    auto dst = out.plane(o);
    std::fill(dst.begin(), dst.end(), biases[o]);
    for (std::size_t i = 0; i < shape.in_channels; ++i) {
      const auto src = in.plane(i);
      const double* kern = kernels.data() + (o * shape.in_channels + i) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const long long dy = static_cast<long long>(ky) - pad;
        const auto rows = valid_range(dy, h);
        for (std::size_t y = rows.begin; y < rows.end; ++y) {
          double* drow = dst.data() + y * w;
          const double* srow = src.data() + static_cast<std::size_t>(static_cast<long long>(y) + dy) * w;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wt = kern[ky * k + kx];
            const long long dx = static_cast<long long>(kx) - pad;
            const auto cols = valid_range(dx, w);
            const double* s = srow + dx;
            for (std::size_t x = cols.begin; x < cols.end; ++x) drow[x] += wt * s[x];
          }
        }
      }
    }
  }
}

void conv2d_same_backward(const ConvShape& shape, std::span<const double> kernels,
                          const FeatureMap& in, const FeatureMap& grad_out,
                          std::span<double> grad_kernels, std::span<double> grad_biases,
                          FeatureMap* grad_in) {
  const std::size_t h = in.height, w = in.width, k = shape.kernel_size;
  const long long pad = static_cast<long long>(k / 2);
  if (grad_in) *grad_in = FeatureMap(shape.in_channels, h, w);
  std::vector<double> partial(w);

  for (std::size_t o = 0; o < shape.out_channels; ++o) {
    const auto g = grad_out.plane(o);
    double bsum = 0.0;
    for (double v : g) bsum += v;
    grad_biases[o] += bsum;

    for (std::size_t i = 0; i < shape.in_channels; ++i) {
      const auto src = in.plane(i);
      const std::size_t kbase = (o * shape.in_channels + i) * k * k;
      double* gk = grad_kernels.data() + kbase;
      const double* kern = kernels.data() + kbase;
      double* gin = grad_in ? grad_in->plane(i).data() : nullptr;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const long long dy = static_cast<long long>(ky) - pad;
        const auto rows = valid_range(dy, h);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const long long dx = static_cast<long long>(kx) - pad;
          const auto cols = valid_range(dx, w);
          const double wt = kern[ky * k + kx];
          // Per-column partial sums keep the inner loops vectorizable.
          std::fill(partial.begin(), partial.end(), 0.0);
          for (std::size_t y = rows.begin; y < rows.end; ++y) {
            const std::size_t sy = static_cast<std::size_t>(static_cast<long long>(y) + dy);
            const double* grow = g.data() + y * w;
            const double* s = src.data() + sy * w + dx;
            for (std::size_t x = cols.begin; x < cols.end; ++x) partial[x] += grow[x] * s[x];
            if (gin) {
              double* d = gin + sy * w + dx;
              for (std::size_t x = cols.begin; x < cols.end; ++x) d[x] += wt * grow[x];
            }
          }
          double acc = 0.0;
          for (std::size_t x = cols.begin; x < cols.end; ++x) acc += partial[x];
          gk[ky * k + kx] += acc;
        }
      }
    }
  }
}

void relu_inplace(FeatureMap& x) {
  for (double& v : x.data) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const FeatureMap& relu_out, FeatureMap& grad) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (!(relu_out.data[i] > 0.0)) grad.data[i] = 0.0;
  }
}

FeatureMap upsample2x(const FeatureMap& in) {
  FeatureMap out(in.channels, in.height * 2, in.width * 2);
  const AxisKernel ax = bilinear_axis(in.width, out.width);
  const AxisKernel ay = bilinear_axis(in.height, out.height);
  for (std::size_t c = 0; c < in.channels; ++c) resample_plane(in.plane(c), ax, ay, out.plane(c));
  return out;
}

FeatureMap upsample2x_backward(const FeatureMap& grad_out) {
  FeatureMap grad_in(grad_out.channels, grad_out.height / 2, grad_out.width / 2);
  const AxisKernel ax = bilinear_axis(grad_in.width, grad_out.width);
  const AxisKernel ay = bilinear_axis(grad_in.height, grad_out.height);
  for (std::size_t c = 0; c < grad_out.channels; ++c) {
    resample_plane_adjoint(grad_out.plane(c), ax, ay, grad_in.plane(c));
  }
  return grad_in;
}

}  // namespace firesr
