#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "firesr/binary_io.hpp"
#include "firesr/error.hpp"
#include "firesr/network.hpp"
#include "firesr/random.hpp"
#include "firesr/raster_io.hpp"
#include "test_util.hpp"

using namespace firesr;

namespace {

using Tensor = std::vector<std::vector<std::vector<double>>>;  // [c][y][x]

Tensor naive_upsample(const Tensor& in) {
  const long h = long(in[0].size()), w = long(in[0][0].size());
  Tensor out(in.size(), std::vector<std::vector<double>>(2 * h, std::vector<double>(2 * w)));
  auto tap = [](double s, long n, long& i0, long& i1, double& f) {
    const double fl = std::floor(s);
    f = s - fl;
    i0 = std::clamp<long>(long(fl), 0, n - 1);
    i1 = std::clamp<long>(long(fl) + 1, 0, n - 1);
  };
  for (std::size_t c = 0; c < in.size(); ++c) {
    for (long y = 0; y < 2 * h; ++y) {
      for (long x = 0; x < 2 * w; ++x) {
        long y0, y1, x0, x1;
        double fy, fx;
        tap((y + 0.5) / 2.0 - 0.5, h, y0, y1, fy);
        tap((x + 0.5) / 2.0 - 0.5, w, x0, x1, fx);
        out[c][y][x] = (1 - fy) * ((1 - fx) * in[c][y0][x0] + fx * in[c][y0][x1]) +
                       fy * ((1 - fx) * in[c][y1][x0] + fx * in[c][y1][x1]);
      }
    }
  }
  return out;
}

Tensor naive_conv(const ConvLayer& l, const Tensor& in) {
  const long h = long(in[0].size()), w = long(in[0][0].size()), k = long(l.shape.kernel_size);
  const long r = k / 2;
  const std::size_t ci = l.shape.in_channels;
  Tensor out(l.shape.out_channels, std::vector<std::vector<double>>(h, std::vector<double>(w)));
  for (std::size_t o = 0; o < l.shape.out_channels; ++o) {
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        double acc = l.biases[o];
        for (std::size_t i = 0; i < ci; ++i)
          for (long ky = 0; ky < k; ++ky)
            for (long kx = 0; kx < k; ++kx) {
              const long sy = y + ky - r, sx = x + kx - r;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              acc += l.kernels[((o * ci + i) * k + ky) * k + kx] * in[i][sy][sx];
            }
        if (l.activation == Activation::relu) acc = std::max(0.0, acc);
        out[o][y][x] = acc;
      }
    }
  }
  return out;
}

Tensor naive_forward(const NetworkWeights& net, Tensor x) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (net.upsamples_before(l)) x = naive_upsample(x);
    x = naive_conv(net.layers[l], x);
  }
  return x;
}

ChannelStack random_stack(std::size_t w, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Raster> ch;
  for (int c = 0; c < 3; ++c) {
    Raster r(w, h);
    for (double& v : r.values()) v = c == 1 ? rng.uniform(-1, 1) : rng.uniform();
    ch.push_back(r);
  }
  return ChannelStack(ch, {std::begin(kInputRoles), std::end(kInputRoles)});
}

}  // namespace

TEST(Network, ParameterCount) {
  for (int s : {2, 4, 8}) {
    const auto net = build_network(s);
    EXPECT_EQ(net.parameter_count(), 7705u);
    EXPECT_EQ(net.parameter_count(),
              9u * 9 * 3 * 16 + 16 + 5 * 5 * 16 * 8 + 8 + 3 * 3 * 8 * 8 + 8 + 1 * 1 * 8 * 1 + 1);
  }
  EXPECT_EQ(build_network(4, {8, 8, 8}).parameter_count(), build_network(8, {8, 8, 8}).parameter_count());
}

TEST(Network, Layout) {
  EXPECT_EQ(build_network(2).upsample_positions, (std::vector<std::size_t>{0}));
  EXPECT_EQ(build_network(4).upsample_positions, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(build_network(8).upsample_positions, (std::vector<std::size_t>{0, 1, 2}));
  const auto net = build_network(4);
  const std::size_t ks[] = {9, 5, 3, 1};
  for (std::size_t l = 0; l < 4; ++l) {
    EXPECT_EQ(net.layers[l].shape.kernel_size, ks[l]);
    EXPECT_EQ(net.layers[l].activation, l == 3 ? Activation::linear : Activation::relu);
  }
  EXPECT_THROW(build_network(3), UsageError);
  EXPECT_THROW(build_network(4, {0, 8, 8}), UsageError);
}

TEST(Network, InitStatistics) {
  const auto net = build_network(4, {}, 17);
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    for (double b : layer.biases) EXPECT_EQ(b, 0.0);
    double ss = 0;
    for (double w : layer.kernels) ss += w * w;
    const double sd = std::sqrt(ss / double(layer.kernels.size()));
    const double expect = std::sqrt(2.0 / double(layer.shape.kernel_size * layer.shape.kernel_size *
                                                 layer.shape.in_channels));
    EXPECT_NEAR(sd / expect, 1.0, 0.15) << "layer " << l;
  }
  for (double w : net.layers.back().kernels) EXPECT_EQ(w, 0.0);
  const auto a = build_network(4, {}, 17), b = build_network(4, {}, 18);
  EXPECT_EQ(a.layers[0].kernels, net.layers[0].kernels);
  EXPECT_NE(a.layers[0].kernels, b.layers[0].kernels);
}

TEST(Network, ForwardMatchesDirectConvolution) {
  for (int s : {2, 4, 8}) {
    auto net = build_network(s, {}, 100 + s);
    Rng rng(s);
    for (auto& l : net.layers) {
      for (double& b : l.biases) b = rng.uniform(-0.1, 0.1);
      for (double& w : l.kernels) w = w == 0.0 ? rng.normal(0, 0.3) : w;
    }
    const ChannelStack in = random_stack(8, 8, s);
    const FeatureMap x = to_features(in);
    Tensor t(3, std::vector<std::vector<double>>(8, std::vector<double>(8)));
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t xx = 0; xx < 8; ++xx) t[c][y][xx] = x.plane(c)[y * 8 + xx];
    const Tensor ref = naive_forward(net, t);
    const FeatureMap y = forward_features(net, x);
    ASSERT_EQ(y.height, 8u * s);
    ASSERT_EQ(y.width, 8u * s);
    double worst = 0;
    for (std::size_t yy = 0; yy < y.height; ++yy)
      for (std::size_t xx = 0; xx < y.width; ++xx) {
        const double a = y.data[yy * y.width + xx], b = ref[0][yy][xx];
        worst = std::max(worst, std::fabs(a - b) / std::max(1e-12, std::fabs(b)));
        EXPECT_LE(std::fabs(a - b), 1e-6 * std::max(std::fabs(b), 1e-6));
      }
    SCOPED_TRACE(worst);
  }
}

TEST(Network, ZeroNetZeroOutputAndDims) {
  auto net = build_network(4);
  for (auto& l : net.layers) std::fill(l.kernels.begin(), l.kernels.end(), 0.0);
  const Raster out = forward(net, random_stack(16, 16, 1));
  EXPECT_EQ(out.width(), 64u);
  EXPECT_EQ(out.height(), 64u);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Network, HandSetIdentityNet) {
  // Center taps pass channel 0 through every stage; the output is then the fire
  // channel upsampled three times by the 2x bilinear stage.
  auto net = build_network(8);
  for (auto& l : net.layers) std::fill(l.kernels.begin(), l.kernels.end(), 0.0);
  for (auto& l : net.layers) {
    const std::size_t k = l.shape.kernel_size;
    l.kernels[(0 * l.shape.in_channels + 0) * k * k + (k / 2) * k + k / 2] = 1.0;
  }
  Raster fire(4, 4), zero(4, 4);
  fire.at(1, 2) = 1.0;
  ChannelStack in({fire, zero, zero}, {std::begin(kInputRoles), std::end(kInputRoles)});
  const Raster out = forward(net, in);
  Tensor t(1, std::vector<std::vector<double>>(4, std::vector<double>(4, 0.0)));
  t[0][1][2] = 1.0;
  const Tensor ref = naive_upsample(naive_upsample(naive_upsample(t)));
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x) EXPECT_NEAR(out.at(y, x), ref[0][y][x], 1e-15);
  // Mass is conserved by each bilinear 2x stage away from borders.
  double sum = 0;
  for (double v : out.values()) sum += v;
  EXPECT_NEAR(sum, 64.0, 1e-9);
}

TEST(Network, NonnegativeWeightsGiveNonnegativeRawOutput) {
  auto net = build_network(4, {}, 3);
  for (auto& l : net.layers) {
    for (double& w : l.kernels) w = std::fabs(w) + 0.01;
  }
  ChannelStack in = random_stack(6, 6, 4);
  std::vector<Raster> ch = in.channels();
  for (double& v : ch[1].values()) v = std::fabs(v);
  const FeatureMap y = forward_features(net, to_features(ChannelStack(ch, in.roles())));
  for (double v : y.data) EXPECT_GE(v, 0.0);
}

TEST(Network, ForwardDeterministicAndClamped) {
  auto net = build_network(2, {}, 6);
  for (double& w : net.layers.back().kernels) w = -1.0;
  const auto in = random_stack(5, 7, 9);
  const Raster a = forward(net, in), b = forward(net, in);
  EXPECT_EQ(std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)), 0);
  for (double v : a.values()) EXPECT_GE(v, 0.0);
  EXPECT_DOUBLE_EQ(a.geo().pixel_size, in.channel(0).geo().pixel_size / 2);
}

TEST(Network, InputChecks) {
  const auto net = build_network(2);
  const auto in = random_stack(4, 4, 1);
  std::vector<Raster> two(in.channels().begin(), in.channels().begin() + 2);
  EXPECT_THROW(forward(net, ChannelStack(two, {ChannelRole::fire, ChannelRole::temp_dev})), DataError);
  EXPECT_THROW(forward(net, ChannelStack(in.channels(), {ChannelRole::temp_dev, ChannelRole::fire,
                                                         ChannelRole::burnable})),
               DataError);
}

TEST(Weights, RoundTrip) {
  test::TempDir dir;
  auto net = build_network(4, {}, 5);
  for (double& w : net.layers.back().kernels) w = 0.25;
  net.metadata["seed"] = "5";
  const std::string p = dir.path() + "/w.fsrw";
  save_weights(net, p);
  const auto back = load_weights(p);
  EXPECT_EQ(back.scale, 4);
  EXPECT_EQ(back.metadata.at("seed"), "5");
  for (std::size_t l = 0; l < 4; ++l)
    for (std::size_t i = 0; i < net.layers[l].kernels.size(); ++i)
      EXPECT_EQ(back.layers[l].kernels[i], static_cast<float>(net.layers[l].kernels[i]));
  // Serialized at single precision, so a second round trip is bit-exact.
  save_weights(back, p);
  const auto again = load_weights(p);
  EXPECT_EQ(encode_weights(again), encode_weights(back));
  const auto in = random_stack(6, 6, 2);
  const Raster a = forward(back, in), b = forward(again, in);
  EXPECT_EQ(std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)), 0);
  const auto exact = decode_weights(encode_weights(net, WeightPrecision::f64));
  EXPECT_EQ(exact.layers[0].kernels, net.layers[0].kernels);
}

TEST(Weights, Errors) {
  const auto net = build_network(4);
  const std::string bytes = encode_weights(net);
  EXPECT_THROW(decode_weights(bytes.substr(0, bytes.size() - 4)), DataError);
  std::string bad = bytes;
  bad[0] = 'Q';
  EXPECT_THROW(decode_weights(bad), DataError);

  // Header claiming (16, 8, 8) with a payload sized for (8, 8, 8).
  const std::string small = encode_weights(build_network(4, {8, 8, 8}));
  const std::uint32_t hlen_big = binary::Reader(bytes.substr(4, 4), "hdr").u32();
  const std::uint32_t hlen_small = binary::Reader(small.substr(4, 4), "hdr").u32();
  const std::string franken = bytes.substr(0, 8 + hlen_big) + small.substr(8 + hlen_small);
  EXPECT_THROW(decode_weights(franken), DataError);

  std::string header = bytes.substr(8, hlen_big);
  const auto pos = header.find("\"format_version\":1");
  ASSERT_NE(pos, std::string::npos);
  header.replace(pos, 18, "\"format_version\":9");
  const std::string v9 = bytes.substr(0, 8) + header + bytes.substr(8 + hlen_big);
  try {
    decode_weights(v9);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(FilterExport, SixteenNineByNine) {
  test::TempDir dir;
  auto net = build_network(4, {}, 1);
  std::fill(net.layers[0].kernels.begin(), net.layers[0].kernels.begin() + 243, 0.0);
  const auto paths = export_layer1_filters(net, dir.path() + "/filters");
  ASSERT_EQ(paths.size(), 16u);
  for (const auto& p : paths) {
    const std::string pgm = test::read_text(p);
    ASSERT_EQ(pgm.substr(0, 11), "P5\n9 9\n255\n");
    EXPECT_EQ(pgm.size(), 11u + 81u);
  }
  const std::string first = test::read_text(paths[0]);
  for (std::size_t i = 11; i < first.size(); ++i) EXPECT_EQ(static_cast<unsigned char>(first[i]), 128);
  const auto per = export_layer1_filters(net, dir.path() + "/per", FilterExport::per_channel);
  EXPECT_EQ(per.size(), 48u);
  EXPECT_NE(per[0].find("conv1_filter_00_fire.pgm"), std::string::npos);
}

TEST(FilterExport, UnwritableDir) {
  test::TempDir dir;
  test::write_text(dir.path() + "/file", "x");
  EXPECT_THROW(export_layer1_filters(build_network(2), dir.path() + "/file/sub"), IoError);
}
