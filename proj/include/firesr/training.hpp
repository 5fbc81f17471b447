#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "firesr/dataset.hpp"
#include "firesr/network.hpp"

namespace firesr {

/// Loss gradients with the same layer shapes as a NetworkWeights.
struct GradientSet {
  struct Layer {
    std::vector<double> kernels;
    std::vector<double> biases;
  };
  std::vector<Layer> layers;

  static GradientSet zeros_like(const NetworkWeights& net);

  void add(const GradientSet& other);
  void scale(double factor);
  bool all_finite() const;
  double squared_norm() const;
  std::size_t size() const;
};

struct MseResult {
  double loss = 0.0;
  FeatureMap grad;  // d(loss)/d(pred) = 2 (pred - target) / N
};

/// Mean over pixels of (pred - target)^2 and its gradient.
MseResult mse_loss(const FeatureMap& pred, const FeatureMap& target);
double mse_loss(const Raster& pred, const Raster& target, Raster* grad = nullptr);

struct BackwardResult {
  GradientSet grads;
  FeatureMap input_grad;
};

/// Reverse-mode derivatives of forward_features given dL/d(output) (same dims as the
/// raw network output).
BackwardResult backward(const NetworkWeights& net, const ForwardTrace& trace,
                        const FeatureMap& upstream_grad);
BackwardResult backward(const NetworkWeights& net, const FeatureMap& input,
                        const FeatureMap& upstream_grad);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  GradientSet m;
  GradientSet v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const NetworkWeights& net);
};

void adam_update(NetworkWeights& net, const GradientSet& grads, AdamState& state,
                 const AdamConfig& config);

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 8;
  int max_epochs = 500;
  int patience = 20;
  /// Square HR crop edge; must be divisible by the scale. nullopt trains on full images.
  std::optional<std::size_t> crop_size = 128;
  std::uint64_t seed = 0;
  ChannelConfig channels;
  unsigned threads = 1;

  void validate(int scale) const;
};

struct LogRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
  bool best = false;
};

/// Everything needed to continue a training run exactly where it stopped.
struct TrainerState {
  NetworkWeights current;
  AdamState adam;
  NetworkWeights best;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int epoch = 0;  // completed epochs
  int epochs_since_improvement = 0;
  std::vector<LogRow> log;
};

struct TrainHooks {
  /// Called after every epoch (including the initial evaluation at epoch 0).
  /// Returning false stops training after the current epoch.
  std::function<bool(const TrainerState&)> on_epoch_end;
};

struct TrainResult {
  NetworkWeights weights;  // best-validation weights
  TrainerState state;
};

/// Minibatch Adam on MSE with best-validation model selection and early stopping.
/// When `resume` is given, continues from that state (config must match the original run).
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  int scale, const TrainConfig& config, const TrainHooks& hooks = {},
                  const TrainerState* resume = nullptr);

/// Loads the manifest's train and val splits and trains at the manifest's scale.
TrainResult train(const DatasetManifest& manifest, const std::string& dataset_dir, int scale,
                  const TrainConfig& config, const TrainHooks& hooks = {},
                  const TrainerState* resume = nullptr);

/// Mean per-sample MSE of the clamped network output against the HR targets.
double evaluate_loss(const NetworkWeights& net, const std::vector<Sample>& samples);

/// CSV with header epoch,train_loss,val_loss,seconds,best_flag.
std::string format_training_log(const std::vector<LogRow>& log);
void write_training_log(const std::vector<LogRow>& log, const std::string& path);

/// Checkpoint container: magic "FSRC", u32 header length, JSON header (scale, channels,
/// counters, log), then f64 payload: current weights, Adam m, Adam v, best weights.
std::string encode_checkpoint(const TrainerState& state);
TrainerState decode_checkpoint(std::string_view bytes);
void save_checkpoint(const TrainerState& state, const std::string& path);
TrainerState load_checkpoint(const std::string& path);

}  // namespace firesr
