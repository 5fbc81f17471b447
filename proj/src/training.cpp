#include "firesr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "firesr/binary_io.hpp"
#include "firesr/error.hpp"
#include "firesr/parallel.hpp"
#include "firesr/random.hpp"

namespace firesr {

// ---------------------------------------------------------------------------
// GradientSet

GradientSet GradientSet::zeros_like(const NetworkWeights& net) {
  GradientSet g;
  for (const auto& l : net.layers) {
    g.layers.push_back({std::vector<double>(l.kernels.size(), 0.0),
                        std::vector<double>(l.biases.size(), 0.0)});
  }
  return g;
}

void GradientSet::add(const GradientSet& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& a = layers[l];
    const auto& b = other.layers[l];
    for (std::size_t i = 0; i < a.kernels.size(); ++i) a.kernels[i] += b.kernels[i];
    for (std::size_t i = 0; i < a.biases.size(); ++i) a.biases[i] += b.biases[i];
  }
}

void GradientSet::scale(double factor) {
  for (auto& l : layers) {
    for (double& v : l.kernels) v *= factor;
    for (double& v : l.biases) v *= factor;
  }
}

bool GradientSet::all_finite() const {
  for (const auto& l : layers) {
    for (double v : l.kernels) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : l.biases) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

double GradientSet::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) {
    for (double v : l.kernels) s += v * v;
    for (double v : l.biases) s += v * v;
  }
  return s;
}

std::size_t GradientSet::size() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.kernels.size() + l.biases.size();
  return n;
}

// ---------------------------------------------------------------------------
// Loss

MseResult mse_loss(const FeatureMap& pred, const FeatureMap& target) {
  if (!pred.same_shape(target)) {
    throw DataError("mse_loss: prediction " + std::to_string(pred.width) + "x" +
                    std::to_string(pred.height) + "x" + std::to_string(pred.channels) +
                    " does not match target " + std::to_string(target.width) + "x" +
                    std::to_string(target.height) + "x" + std::to_string(target.channels));
  }
  MseResult r;
  r.grad = FeatureMap(pred.channels, pred.height, pred.width);
  const double n = static_cast<double>(pred.data.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    sum += d * d;
    r.grad.data[i] = 2.0 * d / n;
  }
  r.loss = sum / n;
  return r;
}

double mse_loss(const Raster& pred, const Raster& target, Raster* grad) {
  if (pred.width() != target.width() || pred.height() != target.height()) {
    throw DataError("mse_loss: prediction " + std::to_string(pred.width()) + "x" +
                    std::to_string(pred.height()) + " does not match target " +
                    std::to_string(target.width()) + "x" + std::to_string(target.height()));
  }
  const auto p = pred.values();
  const auto t = target.values();
  const double n = static_cast<double>(p.size());
  if (grad) *grad = Raster(pred.width(), pred.height(), pred.geo());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    sum += d * d;
    if (grad) grad->values()[i] = 2.0 * d / n;
  }
  return sum / n;
}

// ---------------------------------------------------------------------------
// Backward

BackwardResult backward(const NetworkWeights& net, const ForwardTrace& trace,
                        const FeatureMap& upstream_grad) {
  if (trace.stage_outputs.size() != net.layers.size() ||
      !upstream_grad.same_shape(trace.stage_outputs.back())) {
    throw DataError("backward: upstream gradient shape does not match the forward output");
  }
  BackwardResult r{GradientSet::zeros_like(net), {}};
  FeatureMap g = upstream_grad;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& layer = net.layers[l];
    if (layer.activation == Activation::relu) relu_backward_inplace(trace.stage_outputs[l], g);
    FeatureMap g_in;
    conv2d_same_backward(layer.shape, layer.kernels, trace.stage_inputs[l], g,
                         r.grads.layers[l].kernels, r.grads.layers[l].biases, &g_in);
    g = net.upsamples_before(l) ? upsample2x_backward(g_in) : std::move(g_in);
  }
  r.input_grad = std::move(g);
  return r;
}

BackwardResult backward(const NetworkWeights& net, const FeatureMap& input,
                        const FeatureMap& upstream_grad) {
  ForwardTrace trace;
  forward_features(net, input, &trace);
  return backward(net, trace, upstream_grad);
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::zeros_like(const NetworkWeights& net) {
  return {GradientSet::zeros_like(net), GradientSet::zeros_like(net), 0};
}

void adam_update(NetworkWeights& net, const GradientSet& grads, AdamState& state,
                 const AdamConfig& cfg) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].kernels, grads.layers[l].kernels, state.m.layers[l].kernels,
           state.v.layers[l].kernels);
    update(net.layers[l].biases, grads.layers[l].biases, state.m.layers[l].biases,
           state.v.layers[l].biases);
  }
}

// ---------------------------------------------------------------------------
// Training loop

void TrainConfig::validate(int scale) const {
  check_scale(scale);
  if (!(adam.learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (batch_size == 0) throw UsageError("batch_size must be at least 1");
  if (max_epochs < 0) throw UsageError("max_epochs must be non-negative");
  if (patience < 1) throw UsageError("patience must be at least 1");
  if (crop_size && (*crop_size == 0 || *crop_size % static_cast<std::size_t>(scale) != 0)) {
    throw UsageError("crop_size " + std::to_string(*crop_size) + " must be a positive multiple of scale " +
                     std::to_string(scale));
  }
}

namespace {

struct TensorSample {
  FeatureMap input;   // 3 x h x w
  FeatureMap target;  // 1 x (h*s) x (w*s)
};

TensorSample to_tensors(const Sample& s) {
  TensorSample t{to_features(s.lr_input), FeatureMap(1, s.hr_target.height(), s.hr_target.width())};
  std::copy(s.hr_target.values().begin(), s.hr_target.values().end(), t.target.data.begin());
  return t;
}

FeatureMap crop(const FeatureMap& x, std::size_t row, std::size_t col, std::size_t h, std::size_t w) {
  FeatureMap out(x.channels, h, w);
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      const double* src = x.plane(c).data() + (row + r) * x.width + col;
      std::copy(src, src + w, out.plane(c).data() + r * w);
    }
  }
  return out;
}

struct Window {
  std::size_t row = 0, col = 0, height = 0, width = 0;  // in LR pixels
};

void check_samples(const std::vector<Sample>& samples, int scale, const char* what) {
  for (const auto& s : samples) {
    if (s.scale != scale) {
      throw DataError(std::string(what) + " sample " + s.info.id() + " has scale " +
                      std::to_string(s.scale) + ", expected " + std::to_string(scale));
    }
  }
}

}  // namespace

double evaluate_loss(const NetworkWeights& net, const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : samples) sum += mse_loss(forward(net, s.lr_input), s.hr_target);
  return sum / static_cast<double>(samples.size());
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  int scale, const TrainConfig& config, const TrainHooks& hooks,
                  const TrainerState* resume) {
  config.validate(scale);
  if (train_set.empty()) throw DataError("train: training split is empty");
  if (val_set.empty()) throw DataError("train: validation split is empty");
  check_samples(train_set, scale, "training");
  check_samples(val_set, scale, "validation");

  std::vector<TensorSample> data;
  data.reserve(train_set.size());
  for (const auto& s : train_set) data.push_back(to_tensors(s));

  using clock = std::chrono::steady_clock;
  TrainerState st;
  if (resume) {
    st = *resume;
    if (st.current.scale != scale || st.current.channels != config.channels) {
      throw DataError("resume: checkpoint was written for scale " + std::to_string(st.current.scale) +
                      " but training was requested at scale " + std::to_string(scale) +
                      " (or channel configs differ)");
    }
    validate(st.current);
  } else {
    const auto t0 = clock::now();
    st.current = build_network(scale, config.channels, config.seed);
    st.adam = AdamState::zeros_like(st.current);
    st.best = st.current;
    st.best_val_loss = evaluate_loss(st.current, val_set);
    st.best_epoch = 0;
    st.epoch = 0;
    st.log.push_back({0, evaluate_loss(st.current, train_set), st.best_val_loss,
                      std::chrono::duration<double>(clock::now() - t0).count(), true});
    if (hooks.on_epoch_end && !hooks.on_epoch_end(st)) return {st.best, st};
  }

  const auto s = static_cast<std::size_t>(scale);
  while (st.epoch < config.max_epochs && st.epochs_since_improvement < config.patience) {
    const auto t0 = clock::now();
    const int epoch = st.epoch + 1;
    Rng rng(derive_seed(config.seed, {0xE90C, static_cast<std::uint64_t>(epoch)}));

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      std::vector<Window> windows(n);
      for (std::size_t j = 0; j < n; ++j) {
        const auto& in = data[order[start + j]].input;
        Window w{0, 0, in.height, in.width};
        if (config.crop_size) {
          w.height = std::min(in.height, *config.crop_size / s);
          w.width = std::min(in.width, *config.crop_size / s);
          w.row = rng.below(in.height - w.height + 1);
          w.col = rng.below(in.width - w.width + 1);
        }
        windows[j] = w;
      }

      std::vector<double> losses(n);
      std::vector<GradientSet> grads(n);
      parallel_for(n, config.threads, [&](std::size_t j) {
        const auto& sample = data[order[start + j]];
        const Window& w = windows[j];
        const FeatureMap input = crop(sample.input, w.row, w.col, w.height, w.width);
        const FeatureMap target = crop(sample.target, w.row * s, w.col * s, w.height * s, w.width * s);
        ForwardTrace trace;
        const FeatureMap pred = forward_features(st.current, input, &trace);
        const MseResult mse = mse_loss(pred, target);
        losses[j] = mse.loss;
        grads[j] = backward(st.current, trace, mse.grad).grads;
      });

      GradientSet total = std::move(grads[0]);
      double batch_loss = losses[0];
      for (std::size_t j = 1; j < n; ++j) {
        total.add(grads[j]);
        batch_loss += losses[j];
      }
      total.scale(1.0 / static_cast<double>(n));
      if (!std::isfinite(batch_loss) || !total.all_finite()) {
        throw NumericError("training diverged: nonfinite loss or gradient at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      }
      adam_update(st.current, total, st.adam, config.adam);
      epoch_loss += batch_loss;
    }
    epoch_loss /= static_cast<double>(order.size());

    const double val_loss = evaluate_loss(st.current, val_set);
    if (!std::isfinite(val_loss)) {
      throw NumericError("training diverged: nonfinite validation loss at epoch " +
                         std::to_string(epoch));
    }
    st.epoch = epoch;
    const bool improved = val_loss < st.best_val_loss;
    if (improved) {
      st.best = st.current;
      st.best_val_loss = val_loss;
      st.best_epoch = epoch;
      st.epochs_since_improvement = 0;
    } else {
      ++st.epochs_since_improvement;
    }
    st.log.push_back({epoch, epoch_loss, val_loss,
                      std::chrono::duration<double>(clock::now() - t0).count(), improved});
    if (hooks.on_epoch_end && !hooks.on_epoch_end(st)) break;
  }

  NetworkWeights best = st.best;
  best.metadata["seed"] = std::to_string(config.seed);
  best.metadata["best_epoch"] = std::to_string(st.best_epoch);
  best.metadata["epochs_run"] = std::to_string(st.epoch);
  {
    std::ostringstream os;
    os.precision(17);
    os << st.best_val_loss;
    best.metadata["best_val_loss"] = os.str();
  }
  return {std::move(best), std::move(st)};
}

TrainResult train(const DatasetManifest& manifest, const std::string& dataset_dir, int scale,
                  const TrainConfig& config, const TrainHooks& hooks, const TrainerState* resume) {
  if (manifest.scale != scale) {
    throw DataError("train: dataset was built for scale " + std::to_string(manifest.scale) +
                    ", requested " + std::to_string(scale));
  }
  return train(load_split(manifest, Split::train, dataset_dir),
               load_split(manifest, Split::val, dataset_dir), scale, config, hooks, resume);
}

// ---------------------------------------------------------------------------
// Log

std::string format_training_log(const std::vector<LogRow>& log) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_loss,seconds,best_flag\n";
  for (const auto& r : log) {
    os << r.epoch << "," << r.train_loss << "," << r.val_loss << "," << r.seconds << ","
       << (r.best ? 1 : 0) << "\n";
  }
  return os.str();
}

void write_training_log(const std::vector<LogRow>& log, const std::string& path) {
  binary::write_file(path, format_training_log(log));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::string_view kCheckpointMagic = "FSRC";
constexpr int kCheckpointVersion = 1;

nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double from_json_or_inf(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

template <typename Fn>
void for_each_array(NetworkWeights& net, Fn&& fn) {
  for (auto& l : net.layers) {
    fn(l.kernels);
    fn(l.biases);
  }
}

template <typename Fn>
void for_each_array(GradientSet& g, Fn&& fn) {
  for (auto& l : g.layers) {
    fn(l.kernels);
    fn(l.biases);
  }
}

}  // namespace

std::string encode_checkpoint(const TrainerState& state) {
  validate(state.current);
  nlohmann::json log = nlohmann::json::array();
  for (const auto& r : state.log) {
    log.push_back({r.epoch, finite_or_null(r.train_loss), finite_or_null(r.val_loss), r.seconds,
                   r.best});
  }
  const nlohmann::json header = {
      {"format_version", kCheckpointVersion},
      {"scale", state.current.scale},
      {"channels", {state.current.channels.c1, state.current.channels.c2, state.current.channels.c3}},
      {"epoch", state.epoch},
      {"adam_step", state.adam.step},
      {"best_val_loss", finite_or_null(state.best_val_loss)},
      {"best_epoch", state.best_epoch},
      {"epochs_since_improvement", state.epochs_since_improvement},
      {"metadata", state.best.metadata},
      {"log", log},
      {"dtype", "f64"},
  };
  const std::string text = header.dump();
  std::string out(kCheckpointMagic);
  binary::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  auto put = [&](const std::vector<double>& arr) {
    for (double v : arr) binary::put_f64(out, v);
  };
  TrainerState copy = state;
  for_each_array(copy.current, put);
  for_each_array(copy.adam.m, put);
  for_each_array(copy.adam.v, put);
  for_each_array(copy.best, put);
  return out;
}

TrainerState decode_checkpoint(std::string_view bytes) {
  binary::Reader in(bytes, "checkpoint");
  if (in.take(4) != kCheckpointMagic) throw DataError("checkpoint: bad magic (expected \"FSRC\")");
  const std::uint32_t header_len = in.u32();
  TrainerState st;
  try {
    const auto header = nlohmann::json::parse(in.take(header_len));
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    }
    if (header.at("dtype").get<std::string>() != "f64") {
      throw DataError("checkpoint: payload dtype must be f64");
    }
    const int scale = header.at("scale").get<int>();
    const auto ch = header.at("channels").get<std::vector<std::size_t>>();
    if (ch.size() != 3) throw DataError("checkpoint: 'channels' must have three entries");
    st.current = build_network(scale, {ch[0], ch[1], ch[2]}, 0);
    st.best = st.current;
    st.best.metadata = header.value("metadata", std::map<std::string, std::string>{});
    st.adam = AdamState::zeros_like(st.current);
    st.adam.step = header.at("adam_step").get<std::uint64_t>();
    st.epoch = header.at("epoch").get<int>();
    st.best_val_loss = from_json_or_inf(header.at("best_val_loss"));
    st.best_epoch = header.at("best_epoch").get<int>();
    st.epochs_since_improvement = header.at("epochs_since_improvement").get<int>();
    for (const auto& r : header.at("log")) {
      st.log.push_back({r.at(0).get<int>(), from_json_or_inf(r.at(1)), from_json_or_inf(r.at(2)),
                        r.at(3).get<double>(), r.at(4).get<bool>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: invalid header: ") + e.what());
  }
  const std::size_t expected = 4 * st.current.parameter_count() * 8;
  if (in.remaining() != expected) {
    throw DataError("checkpoint: payload has " + std::to_string(in.remaining()) +
                    " bytes, header shapes need " + std::to_string(expected));
  }
  auto get = [&](std::vector<double>& arr) {
    for (double& v : arr) v = in.f64();
  };
  for_each_array(st.current, get);
  for_each_array(st.adam.m, get);
  for_each_array(st.adam.v, get);
  for_each_array(st.best, get);
  return st;
}

void save_checkpoint(const TrainerState& state, const std::string& path) {
  binary::write_file(path, encode_checkpoint(state));
}

TrainerState load_checkpoint(const std::string& path) {
  try {
    return decode_checkpoint(binary::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace firesr
