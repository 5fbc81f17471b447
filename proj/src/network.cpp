#include "firesr/network.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "firesr/binary_io.hpp"
#include "firesr/error.hpp"
#include "firesr/random.hpp"
#include "firesr/raster_io.hpp"

namespace firesr {

std::string_view to_string(Activation a) {
  return a == Activation::relu ? "relu" : "linear";
}

std::size_t NetworkWeights::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

bool NetworkWeights::upsamples_before(std::size_t layer) const noexcept {
  return std::find(upsample_positions.begin(), upsample_positions.end(), layer) !=
         upsample_positions.end();
}

void check_scale(int scale) {
  if (scale != 2 && scale != 4 && scale != 8) {
    throw UsageError("scale must be 2, 4 or 8, got " + std::to_string(scale));
  }
}

namespace {

std::vector<std::size_t> upsample_positions_for(int scale) {
  switch (scale) {
    case 2: return {0};
    case 4: return {0, 1};
    default: return {0, 1, 2};
  }
}

std::vector<ConvLayer> empty_layers(const ChannelConfig& ch) {
  if (ch.c1 == 0 || ch.c2 == 0 || ch.c3 == 0) {
    throw UsageError("channel counts must be at least 1");
  }
  const std::size_t widths[5] = {kInputChannels, ch.c1, ch.c2, ch.c3, 1};
  std::vector<ConvLayer> layers(4);
  for (std::size_t l = 0; l < 4; ++l) {
    auto& layer = layers[l];
    layer.shape = {kKernelSizes[l], widths[l], widths[l + 1]};
    layer.kernels.assign(layer.shape.kernel_count(), 0.0);
    layer.biases.assign(layer.shape.out_channels, 0.0);
    layer.activation = l == 3 ? Activation::linear : Activation::relu;
  }
  return layers;
}

}  // namespace

NetworkWeights build_network(int scale, ChannelConfig channels, std::uint64_t seed) {
  check_scale(scale);
  NetworkWeights net;
  net.scale = scale;
  net.channels = channels;
  net.layers = empty_layers(channels);
  net.upsample_positions = upsample_positions_for(scale);
  Rng rng(derive_seed(seed, {0x1a17}));
  for (auto& layer : net.layers) {
    // The linear output layer starts at zero: a He-scaled start puts most raw
    // outputs far below the sparse targets and training collapses to a constant.
    if (layer.activation == Activation::linear) continue;
    const double fan_in = static_cast<double>(layer.shape.kernel_size * layer.shape.kernel_size *
                                              layer.shape.in_channels);
    const double stddev = std::sqrt(2.0 / fan_in);
    for (double& w : layer.kernels) w = rng.normal(0.0, stddev);
  }
  return net;
}

void validate(const NetworkWeights& net) {
  check_scale(net.scale);
  if (net.layers.size() != 4) throw DataError("network must have exactly four conv layers");
  const auto expected = empty_layers(net.channels);
  for (std::size_t l = 0; l < 4; ++l) {
    const auto& a = net.layers[l];
    const auto& e = expected[l];
    if (a.shape.kernel_size != e.shape.kernel_size || a.shape.in_channels != e.shape.in_channels ||
        a.shape.out_channels != e.shape.out_channels || a.kernels.size() != e.kernels.size() ||
        a.biases.size() != e.biases.size()) {
      throw DataError("conv layer " + std::to_string(l) + " does not match channel config");
    }
  }
  const std::size_t stages = net.scale == 2 ? 1 : net.scale == 4 ? 2 : 3;
  if (net.upsample_positions.size() != stages) {
    throw DataError("scale " + std::to_string(net.scale) + " needs " + std::to_string(stages) +
                    " upsample stages, network has " +
                    std::to_string(net.upsample_positions.size()));
  }
}

FeatureMap forward_from(const NetworkWeights& net, std::size_t first_layer, FeatureMap x) {
  FeatureMap y;
  for (std::size_t l = first_layer; l < net.layers.size(); ++l) {
    if (l != first_layer && net.upsamples_before(l)) x = upsample2x(x);
    const auto& layer = net.layers[l];
    conv2d_same(layer.shape, layer.kernels, layer.biases, x, y);
    if (layer.activation == Activation::relu) relu_inplace(y);
    std::swap(x, y);
  }
  return x;
}

FeatureMap forward_features(const NetworkWeights& net, const FeatureMap& input,
                            ForwardTrace* trace) {
  if (input.channels != net.layers.front().shape.in_channels) {
    throw DataError("network expects " + std::to_string(net.layers.front().shape.in_channels) +
                    " input channels, got " + std::to_string(input.channels));
  }
  if (!trace) {
    FeatureMap x = net.upsamples_before(0) ? upsample2x(input) : input;
    return forward_from(net, 0, std::move(x));
  }
  trace->stage_inputs.assign(net.layers.size(), {});
  trace->stage_outputs.assign(net.layers.size(), {});
  const FeatureMap* x = &input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& in = trace->stage_inputs[l];
    in = net.upsamples_before(l) ? upsample2x(*x) : *x;
    const auto& layer = net.layers[l];
    auto& out = trace->stage_outputs[l];
    conv2d_same(layer.shape, layer.kernels, layer.biases, in, out);
    if (layer.activation == Activation::relu) relu_inplace(out);
    x = &out;
  }
  return trace->stage_outputs.back();
}

FeatureMap to_features(const ChannelStack& input) {
  if (input.size() != kInputChannels) {
    throw DataError("FireSRnet input needs 3 channels (fire, temp_dev, burnable), got " +
                    std::to_string(input.size()));
  }
  for (std::size_t i = 0; i < kInputChannels; ++i) {
    if (input.roles()[i] != kInputRoles[i]) {
      throw DataError("FireSRnet input channel " + std::to_string(i) + " must be '" +
                      std::string(to_string(kInputRoles[i])) + "', got '" +
                      std::string(to_string(input.roles()[i])) + "'");
    }
  }
  FeatureMap x(kInputChannels, input.height(), input.width());
  for (std::size_t c = 0; c < kInputChannels; ++c) {
    const auto& ch = input.channel(c);
    ch.require_finite("forward input");
    const Raster clean = ch.with_nodata_zeroed();
    std::copy(clean.values().begin(), clean.values().end(), x.plane(c).begin());
  }
  return x;
}

Raster forward(const NetworkWeights& net, const ChannelStack& input) {
  const FeatureMap y = forward_features(net, to_features(input));
  GeoTransform geo = input.channel(0).geo();
  geo.pixel_size /= static_cast<double>(net.scale);
  Raster out(y.width, y.height, geo);
  auto vals = out.values();
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = std::max(0.0, y.data[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::string_view kWeightsMagic = "FSRW";
constexpr int kWeightsVersion = 1;

}  // namespace

std::string encode_weights(const NetworkWeights& net, WeightPrecision precision) {
  validate(net);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers) {
    layers.push_back({{"kernel_size", l.shape.kernel_size},
                      {"in_channels", l.shape.in_channels},
                      {"out_channels", l.shape.out_channels},
                      {"activation", to_string(l.activation)}});
  }
  const nlohmann::json header = {
      {"format_version", kWeightsVersion},
      {"scale", net.scale},
      {"channels", {net.channels.c1, net.channels.c2, net.channels.c3}},
      {"layers", layers},
      {"upsample_positions", net.upsample_positions},
      {"dtype", precision == WeightPrecision::f32 ? "f32" : "f64"},
      {"metadata", net.metadata},
  };
  const std::string text = header.dump();
  std::string out(kWeightsMagic);
  binary::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& l : net.layers) {
    for (const auto* arr : {&l.kernels, &l.biases}) {
      for (double v : *arr) {
        if (precision == WeightPrecision::f32) {
          binary::put_f32(out, static_cast<float>(v));
        } else {
          binary::put_f64(out, v);
        }
      }
    }
  }
  return out;
}

NetworkWeights decode_weights(std::string_view bytes) {
  binary::Reader in(bytes, "weights file");
  if (in.take(4) != kWeightsMagic) throw DataError("weights file: bad magic (expected \"FSRW\")");
  const std::uint32_t header_len = in.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.take(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("weights file: malformed JSON header: ") + e.what());
  }

  NetworkWeights net;
  std::size_t width = 4;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kWeightsVersion) {
      throw DataError("weights file: unsupported format version " + std::to_string(version) +
                      " (expected " + std::to_string(kWeightsVersion) + ")");
    }
    net.scale = header.at("scale").get<int>();
    check_scale(net.scale);
    const auto ch = header.at("channels").get<std::vector<std::size_t>>();
    if (ch.size() != 3) throw DataError("weights file: 'channels' must have three entries");
    net.channels = {ch[0], ch[1], ch[2]};
    net.layers = empty_layers(net.channels);
    net.upsample_positions = header.at("upsample_positions").get<std::vector<std::size_t>>();
    const auto& declared = header.at("layers");
    if (declared.size() != net.layers.size()) {
      throw DataError("weights file: header lists " + std::to_string(declared.size()) +
                      " layers, expected 4");
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const auto& d = declared[l];
      const auto& s = net.layers[l].shape;
      if (d.at("kernel_size").get<std::size_t>() != s.kernel_size ||
          d.at("in_channels").get<std::size_t>() != s.in_channels ||
          d.at("out_channels").get<std::size_t>() != s.out_channels) {
        throw DataError("weights file: layer " + std::to_string(l) +
                        " shape disagrees with channel config");
      }
    }
    const std::string dtype = header.at("dtype").get<std::string>();
    if (dtype == "f32") {
      width = 4;
    } else if (dtype == "f64") {
      width = 8;
    } else {
      throw DataError("weights file: unsupported dtype '" + dtype + "'");
    }
    if (header.contains("metadata")) {
      net.metadata = header["metadata"].get<std::map<std::string, std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("weights file: invalid header: ") + e.what());
  }

  const std::size_t expected = net.parameter_count() * width;
  if (in.remaining() != expected) {
    throw DataError("weights file: payload has " + std::to_string(in.remaining()) +
                    " bytes but header shapes need " + std::to_string(expected));
  }
  for (auto& l : net.layers) {
    for (auto* arr : {&l.kernels, &l.biases}) {
      for (double& v : *arr) v = width == 4 ? static_cast<double>(in.f32()) : in.f64();
    }
  }
  validate(net);
  return net;
}

void save_weights(const NetworkWeights& net, const std::string& path, WeightPrecision precision) {
  binary::write_file(path, encode_weights(net, precision));
}

NetworkWeights load_weights(const std::string& path) {
  try {
    return decode_weights(binary::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::vector<std::string> export_layer1_filters(const NetworkWeights& net, const std::string& dir,
                                               FilterExport mode) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir + "'");

  const auto& layer = net.layers.front();
  const std::size_t k = layer.shape.kernel_size;
  const std::size_t in = layer.shape.in_channels;
  static constexpr const char* kChannelNames[] = {"fire", "temp_dev", "burnable"};
  std::vector<std::string> paths;
  auto name = [](std::size_t f) {
    std::ostringstream os;
    os << "conv1_filter_" << (f < 10 ? "0" : "") << f;
    return os.str();
  };
  for (std::size_t f = 0; f < layer.shape.out_channels; ++f) {
    const double* kern = layer.kernels.data() + f * in * k * k;
    if (mode == FilterExport::channel_mean) {
      Raster img(k, k);
      for (std::size_t i = 0; i < in; ++i) {
        for (std::size_t j = 0; j < k * k; ++j) img.values()[j] += kern[i * k * k + j];
      }
      for (double& v : img.values()) v /= static_cast<double>(in);
      paths.push_back((fs::path(dir) / (name(f) + ".pgm")).string());
      write_pgm(img, paths.back());
    } else {
      for (std::size_t i = 0; i < in; ++i) {
        Raster img(k, k, std::vector<double>(kern + i * k * k, kern + (i + 1) * k * k));
        const std::string suffix = i < 3 ? kChannelNames[i] : std::to_string(i);
        paths.push_back((fs::path(dir) / (name(f) + "_" + suffix + ".pgm")).string());
        write_pgm(img, paths.back());
      }
    }
  }
  return paths;
}

}  // namespace firesr
