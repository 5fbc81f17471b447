#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "firesr/error.hpp"
#include "firesr/layers.hpp"
#include "firesr/random.hpp"
#include "firesr/synth.hpp"
#include "firesr/training.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace firesr;

namespace {

FeatureMap random_map(std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
  FeatureMap m(c, h, w);
  for (double& v : m.data) v = rng.uniform(-1, 1);
  return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct TinyData {
  std::vector<Sample> train, val;
};

TinyData tiny_data(int scale, std::uint64_t seed = 3) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_months = 14;
  cfg.hr_width = 32;
  cfg.hr_height = 16;
  cfg.scale = scale;
  cfg.start_year = 2010;
  auto all = synth_generate(cfg);
  TinyData d;
  for (std::size_t i = 0; i < all.size(); ++i) (i < 10 ? d.train : d.val).push_back(all[i]);
  return d;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.max_epochs = 4;
  c.crop_size = 16;
  c.batch_size = 4;
  c.seed = 11;
  return c;
}

bool same_weights(const NetworkWeights& a, const NetworkWeights& b) {
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].kernels != b.layers[l].kernels || a.layers[l].biases != b.layers[l].biases)
      return false;
  }
  return true;
}

}  // namespace

TEST(Mse, Examples) {
  const Raster t(2, 1, std::vector<double>{1, 1});
  Raster g(1, 1);
  EXPECT_DOUBLE_EQ(mse_loss(Raster(2, 1, std::vector<double>{0, 0}), t, &g), 1.0);
  EXPECT_DOUBLE_EQ(g.values()[0], -1.0);
  EXPECT_DOUBLE_EQ(g.values()[1], -1.0);
  EXPECT_EQ(mse_loss(t, t, &g), 0.0);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
  const Raster p(2, 1, std::vector<double>{1.5, 0.25});
  const Raster p2(2, 1, std::vector<double>{2.0, -0.5});  // residuals doubled
  EXPECT_DOUBLE_EQ(mse_loss(p2, t), 4.0 * mse_loss(p, t));
  EXPECT_THROW(mse_loss(Raster(3, 1), t), DataError);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const auto net = build_network(4, {}, 2);
  Rng rng(1);
  const FeatureMap x = random_map(3, 5, 5, rng);
  const auto r = backward(net, x, FeatureMap(1, 20, 20));
  EXPECT_EQ(r.grads.squared_norm(), 0.0);
  for (double v : r.input_grad.data) EXPECT_EQ(v, 0.0);
}

TEST(Backward, OneByOneConvByHand) {
  const ConvShape shape{1, 1, 1};
  FeatureMap x(1, 2, 2), g(1, 2, 2);
  x.data = {1, 2, 3, 4};
  g.data = {0.5, -1, 2, 0};
  std::vector<double> k = {0.7}, dk = {0}, db = {0};
  FeatureMap dx;
  conv2d_same_backward(shape, k, x, g, dk, db, &dx);
  EXPECT_DOUBLE_EQ(dk[0], 0.5 * 1 - 1 * 2 + 2 * 3 + 0 * 4);
  EXPECT_DOUBLE_EQ(db[0], 1.5);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(dx.data[i], 0.7 * g.data[i]);
}

TEST(Backward, ConvAdjointIdentity) {
  Rng rng(7);
  for (std::size_t k : {1u, 3u, 5u, 9u}) {
    const ConvShape shape{k, 3, 4};
    std::vector<double> kern(shape.kernel_count()), bias(4, 0.0);
    for (double& v : kern) v = rng.uniform(-1, 1);
    const FeatureMap x = random_map(3, 7, 6, rng);
    const FeatureMap g = random_map(4, 7, 6, rng);
    FeatureMap y;
    conv2d_same(shape, kern, bias, x, y);
    std::vector<double> dk(kern.size()), db(4);
    FeatureMap dx;
    conv2d_same_backward(shape, kern, x, g, dk, db, &dx);
    EXPECT_NEAR(dot(y.data, g.data), dot(x.data, dx.data), 1e-10);
    // The kernel gradient is the adjoint with respect to the kernel as well.
    FeatureMap yk;
    conv2d_same(shape, kern, bias, x, yk);
    EXPECT_NEAR(dot(yk.data, g.data), dot(kern, dk), 1e-10);
  }
}

TEST(Backward, UpsampleAdjointIdentity) {
  Rng rng(8);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{1, 1}, {4, 4}, {3, 7}, {16, 9}}) {
    const FeatureMap x = random_map(2, h, w, rng);
    const FeatureMap g = random_map(2, 2 * h, 2 * w, rng);
    EXPECT_NEAR(dot(upsample2x(x).data, g.data), dot(x.data, upsample2x_backward(g).data), 1e-10);
  }
}

TEST(Backward, InputGradientMatchesFiniteDifferences) {
  auto net = build_network(2, {4, 4, 4}, 5);
  Rng rng(2);
  for (double& w : net.layers.back().kernels) w = rng.normal(0, 0.5);
  const FeatureMap x = random_map(3, 4, 4, rng);
  FeatureMap t = random_map(1, 8, 8, rng);
  const auto grad = backward(net, x, mse_loss(forward_features(net, x), t).grad).input_grad;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    FeatureMap a = x, b = x;
    a.data[i] += 1e-5;
    b.data[i] -= 1e-5;
    const double fd = (mse_loss(forward_features(net, a), t).loss -
                       mse_loss(forward_features(net, b), t).loss) / 2e-5;
    EXPECT_NEAR(fd, grad.data[i], 1e-7 + 1e-5 * std::fabs(fd));
  }
}

TEST(GradientCheck, EveryParameterSmallConfig) {
  // Full-width networks are checked by the acceptance binary; this keeps the unit
  // suite fast while covering every layer kind at every scale.
  for (int s : {2, 4, 8}) {
    const auto r = test::gradient_check(build_network(s, {4, 3, 2}, 40 + s), 8, 90 + s);
    EXPECT_EQ(r.failures, 0u) << "scale " << s << ": " << r.first_failure;
    EXPECT_EQ(r.checked, build_network(s, {4, 3, 2}).parameter_count());
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto net = build_network(2, {1, 1, 1}, 1);
  const auto before = net;
  auto g = GradientSet::zeros_like(net);
  g.layers[0].kernels[0] = 3.0;
  g.layers[3].biases[0] = -0.002;
  auto st = AdamState::zeros_like(net);
  adam_update(net, g, st, {});
  // Bias-corrected first moments are g and g^2, so the step is lr * g / (|g| + eps).
  EXPECT_NEAR(net.layers[0].kernels[0], before.layers[0].kernels[0] - 1e-3 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(net.layers[3].biases[0], 1e-3 * 0.002 / (0.002 + 1e-8), 1e-15);
  EXPECT_EQ(net.layers[0].kernels[1], before.layers[0].kernels[1]);
  EXPECT_EQ(st.step, 1u);
  EXPECT_DOUBLE_EQ(st.m.layers[0].kernels[0], 0.3);
  EXPECT_NEAR(st.v.layers[0].kernels[0], 0.009, 1e-15);
}

TEST(Training, ConfigValidation) {
  TrainConfig c;
  c.crop_size = 30;
  EXPECT_THROW(c.validate(4), UsageError);
  c.crop_size = 32;
  EXPECT_NO_THROW(c.validate(4));
  c.adam.learning_rate = 0;
  EXPECT_THROW(c.validate(4), UsageError);
  EXPECT_THROW(TrainConfig{}.validate(3), UsageError);
}

TEST(Training, ZeroTargetsDriveLossToZero) {
  auto d = tiny_data(2);
  for (auto* set : {&d.train, &d.val}) {
    for (auto& s : *set) {
      for (double& v : s.hr_target.values()) v = 0.0;
    }
  }
  TrainConfig c = tiny_config();
  c.max_epochs = 30;
  c.adam.learning_rate = 3e-3;
  const auto r = train(d.train, d.val, 2, c);
  EXPECT_LT(r.state.best_val_loss, 1e-6);
  EXPECT_LT(std::fabs(r.weights.layers.back().biases[0]), 0.05);
}

TEST(Training, SingleSampleOverfitIsMonotone) {
  auto d = tiny_data(2);
  std::vector<Sample> one = {d.train[3]};
  TrainConfig c;
  c.crop_size = std::nullopt;
  c.batch_size = 1;
  c.max_epochs = 25;
  c.adam.learning_rate = 1e-4;
  const auto r = train(one, one, 2, c);
  const auto& log = r.state.log;
  ASSERT_EQ(log.size(), 26u);
  for (std::size_t i = 2; i < log.size(); ++i) EXPECT_LE(log[i].val_loss, log[i - 1].val_loss * (1 + 1e-9));
  EXPECT_LT(log.back().val_loss, log.front().val_loss);
}

TEST(Training, DeterministicAndLogged) {
  const auto d = tiny_data(4);
  const auto a = train(d.train, d.val, 4, tiny_config());
  const auto b = train(d.train, d.val, 4, tiny_config());
  EXPECT_TRUE(same_weights(a.weights, b.weights));
  ASSERT_EQ(a.state.log.size(), 5u);
  for (std::size_t i = 0; i < a.state.log.size(); ++i) {
    EXPECT_EQ(a.state.log[i].train_loss, b.state.log[i].train_loss);
    EXPECT_EQ(a.state.log[i].val_loss, b.state.log[i].val_loss);
  }
  EXPECT_EQ(encode_weights(a.weights), encode_weights(b.weights));
  const std::string csv = format_training_log(a.state.log);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_loss,val_loss,seconds,best_flag");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_EQ(a.weights.metadata.at("best_epoch"), std::to_string(a.state.best_epoch));
}

TEST(Training, ThreadedMatchesSerial) {
  const auto d = tiny_data(4);
  TrainConfig c = tiny_config();
  const auto serial = train(d.train, d.val, 4, c);
  c.threads = 3;
  const auto threaded = train(d.train, d.val, 4, c);
  EXPECT_TRUE(same_weights(serial.state.current, threaded.state.current));
}

TEST(Training, EarlyStoppingKeepsBest) {
  const auto d = tiny_data(2);
  TrainConfig c = tiny_config();
  c.max_epochs = 50;
  c.patience = 2;
  c.adam.learning_rate = 0.5;  // wildly unstable: validation stops improving quickly
  try {
    const auto r = train(d.train, d.val, 2, c);
    EXPECT_LT(r.state.epoch, 50);
    EXPECT_EQ(r.state.epochs_since_improvement, 2);
    EXPECT_EQ(evaluate_loss(r.weights, d.val), r.state.best_val_loss);
  } catch (const NumericError&) {
    SUCCEED();
  }
}

TEST(Training, DivergenceIsReported) {
  const auto d = tiny_data(2);
  TrainConfig c = tiny_config();
  c.adam.learning_rate = 1e300;
  try {
    train(d.train, d.val, 2, c);
    FAIL() << "expected divergence";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Training, Errors) {
  const auto d = tiny_data(4);
  EXPECT_THROW(train({}, d.val, 4, tiny_config()), DataError);
  EXPECT_THROW(train(d.train, {}, 4, tiny_config()), DataError);
  EXPECT_THROW(train(d.train, d.val, 2, tiny_config()), DataError);
}

TEST(Checkpoint, RoundTripBitExact) {
  const auto d = tiny_data(4);
  const auto r = train(d.train, d.val, 4, tiny_config());
  const std::string bytes = encode_checkpoint(r.state);
  const TrainerState back = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_TRUE(same_weights(back.current, r.state.current));
  EXPECT_TRUE(same_weights(back.best, r.state.best));
  EXPECT_EQ(back.adam.step, r.state.adam.step);
  EXPECT_EQ(back.adam.m.squared_norm(), r.state.adam.m.squared_norm());
  EXPECT_EQ(back.adam.v.squared_norm(), r.state.adam.v.squared_norm());
  EXPECT_EQ(back.best_val_loss, r.state.best_val_loss);
  EXPECT_EQ(back.log.size(), r.state.log.size());
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 8)), DataError);
  std::string bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), DataError);
}

TEST(Checkpoint, ResumeEqualsUninterrupted) {
  test::TempDir dir;
  const auto d = tiny_data(4);
  const auto full = train(d.train, d.val, 4, tiny_config());

  TrainHooks stop;
  stop.on_epoch_end = [](const TrainerState& s) { return s.epoch < 2; };
  const auto part = train(d.train, d.val, 4, tiny_config(), stop);
  ASSERT_EQ(part.state.epoch, 2);
  save_checkpoint(part.state, dir.path() + "/ck.fsrc");
  const TrainerState loaded = load_checkpoint(dir.path() + "/ck.fsrc");
  const auto resumed = train(d.train, d.val, 4, tiny_config(), {}, &loaded);

  EXPECT_TRUE(same_weights(full.state.current, resumed.state.current));
  EXPECT_TRUE(same_weights(full.weights, resumed.weights));
  EXPECT_EQ(encode_weights(full.weights), encode_weights(resumed.weights));
  ASSERT_EQ(full.state.log.size(), resumed.state.log.size());
  for (std::size_t i = 0; i < full.state.log.size(); ++i)
    EXPECT_EQ(full.state.log[i].val_loss, resumed.state.log[i].val_loss);
}

TEST(Checkpoint, ResumeWithMismatchedScaleFails) {
  const auto d4 = tiny_data(4);
  const auto d2 = tiny_data(2);
  TrainConfig c = tiny_config();
  c.max_epochs = 1;
  const auto r = train(d4.train, d4.val, 4, c);
  EXPECT_THROW(train(d2.train, d2.val, 2, c, {}, &r.state), DataError);
}

TEST(Training, ImprovesOnSyntheticData) {
  SynthConfig cfg;
  cfg.seed = 5;
  cfg.n_months = 40;
  cfg.hr_width = 64;
  cfg.hr_height = 32;
  cfg.start_year = 2010;
  auto all = synth_generate(cfg);
  std::vector<Sample> tr(all.begin(), all.begin() + 32), va(all.begin() + 32, all.end());
  TrainConfig c;
  c.crop_size = 32;
  c.max_epochs = 40;
  c.patience = 40;
  c.adam.learning_rate = 3e-3;
  c.seed = 1;
  const auto r = train(tr, va, 4, c);
  EXPECT_LT(r.state.best_val_loss, 0.8 * r.state.log.front().val_loss);
}
