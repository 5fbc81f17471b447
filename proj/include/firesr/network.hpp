#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "firesr/layers.hpp"
#include "firesr/raster.hpp"

namespace firesr {

enum class Activation { relu, linear };

std::string_view to_string(Activation a);

struct ConvLayer {
  ConvShape shape;
  std::vector<double> kernels;  // [out][in][k][k]
  std::vector<double> biases;   // [out]
  Activation activation = Activation::relu;

  std::size_t parameter_count() const noexcept { return kernels.size() + biases.size(); }
};

/// Widths of the three hidden convolutions (conv9, conv5, conv3 outputs).
struct ChannelConfig {
  std::size_t c1 = 16;
  std::size_t c2 = 8;
  std::size_t c3 = 8;

  bool operator==(const ChannelConfig&) const = default;
};

/// FireSRnet: four same-padded convolutions with kernel sizes 9, 5, 3, 1 and
/// log2(scale) 2x bilinear upsampling stages placed before the first convs.
struct NetworkWeights {
  int scale = 4;
  ChannelConfig channels;
  std::vector<ConvLayer> layers;
  /// Conv layer indices preceded by a 2x upsample.
  std::vector<std::size_t> upsample_positions;
  /// Free-form provenance recorded alongside the weights (training seed, epochs, ...).
  std::map<std::string, std::string> metadata;

  std::size_t parameter_count() const noexcept;
  bool upsamples_before(std::size_t layer) const noexcept;
};

inline constexpr std::size_t kInputChannels = 3;
inline constexpr std::size_t kKernelSizes[4] = {9, 5, 3, 1};

/// Throws UsageError unless scale is 2, 4 or 8.
void check_scale(int scale);

/// Builds the layer stack for `scale`. ReLU layers get He-normal kernels
/// (std = sqrt(2 / (k*k*in))) drawn deterministically from `seed`; the linear
/// output layer and all biases start at zero.
NetworkWeights build_network(int scale, ChannelConfig channels = {}, std::uint64_t seed = 0);

/// Checks the structural invariants; throws DataError on violation.
void validate(const NetworkWeights& net);

/// Intermediate tensors recorded by forward_features for backpropagation.
/// stage_inputs[l] is the input to conv layer l (after any upsample);
/// stage_outputs[l] is its (post-activation) output.
struct ForwardTrace {
  std::vector<FeatureMap> stage_inputs;
  std::vector<FeatureMap> stage_outputs;
};

/// Raw network output (linear, unclamped) for a 3 x h x w input tensor.
FeatureMap forward_features(const NetworkWeights& net, const FeatureMap& input,
                            ForwardTrace* trace = nullptr);

/// Runs the network from conv layer `first_layer` on, given that layer's
/// input (i.e. after its upsample, if any).
FeatureMap forward_from(const NetworkWeights& net, std::size_t first_layer, FeatureMap x);

/// Packs a (fire, temp_dev, burnable) stack into a tensor; throws DataError on
/// wrong channel count or role order.
FeatureMap to_features(const ChannelStack& input);

/// Inference: output dims are input dims x scale, clamped at 0.
Raster forward(const NetworkWeights& net, const ChannelStack& input);

enum class WeightPrecision { f32, f64 };

/// Versioned weights container:
///   bytes 0-3  magic "FSRW"
///   bytes 4-7  little-endian u32 header length N
///   N bytes    JSON header {format_version, scale, channels, layers, upsample_positions,
///                           dtype, metadata}
///   payload    per layer: kernels then biases, little-endian f32 (or f64)
std::string encode_weights(const NetworkWeights& net, WeightPrecision precision = WeightPrecision::f32);
NetworkWeights decode_weights(std::string_view bytes);

void save_weights(const NetworkWeights& net, const std::string& path,
                  WeightPrecision precision = WeightPrecision::f32);
NetworkWeights load_weights(const std::string& path);

enum class FilterExport { channel_mean, per_channel };

/// Writes the first-layer kernels as min-max scaled PGM images and returns the
/// paths: one per filter (channel_mean) or one per filter and input channel.
std::vector<std::string> export_layer1_filters(const NetworkWeights& net, const std::string& dir,
                                               FilterExport mode = FilterExport::channel_mean);

}  // namespace firesr
