#include "firesr/metrics.hpp"

#include <cmath>

#include "firesr/error.hpp"

namespace firesr {

void ContinuousAccumulator::add(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw DataError("continuous_metrics: prediction and target sizes differ");
  }
  if (pred.empty()) return;
  ContinuousAccumulator part;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    part.sse_ += d * d;
    sum += target[i];
  }
  part.n_ = pred.size();
  part.mean_ = sum / static_cast<double>(part.n_);
  for (double t : target) part.m2_ += (t - part.mean_) * (t - part.mean_);
  merge(part);
}

void ContinuousAccumulator::merge(const ContinuousAccumulator& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
  const double delta = o.mean_ - mean_;
  const double n = na + nb;
  mean_ += delta * nb / n;
  m2_ += o.m2_ + delta * delta * na * nb / n;
  sse_ += o.sse_;
  n_ += o.n_;
}

ContinuousMetrics ContinuousAccumulator::result() const {
  ContinuousMetrics m;
  m.n = n_;
  if (n_ == 0) return m;
  m.rmse = std::sqrt(sse_ / static_cast<double>(n_));
  if (m2_ > 0.0) m.r2 = 1.0 - sse_ / m2_;
  return m;
}

ContinuousMetrics continuous_metrics(const std::vector<Raster>& preds,
                                     const std::vector<Raster>& targets) {
  if (preds.size() != targets.size()) {
    throw DataError("continuous_metrics: " + std::to_string(preds.size()) + " predictions vs " +
                    std::to_string(targets.size()) + " targets");
  }
  ContinuousAccumulator acc;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].width() != targets[i].width() || preds[i].height() != targets[i].height()) {
      throw DataError("continuous_metrics: dimension mismatch at item " + std::to_string(i));
    }
    acc.add(preds[i].values(), targets[i].values());
  }
  return acc.result();
}

std::size_t BinaryFireMap::count() const {
  std::size_t n = 0;
  for (auto b : bits) n += b;
  return n;
}

BinaryFireMap binarize(const Raster& r, double threshold) {
  if (!(threshold >= 0.0)) throw UsageError("binarize: threshold must be non-negative");
  BinaryFireMap m{r.width(), r.height(), std::vector<std::uint8_t>(r.size()), threshold};
  const auto v = r.values();
  for (std::size_t i = 0; i < v.size(); ++i) m.bits[i] = v[i] > threshold ? 1 : 0;
  return m;
}

void Confusion::add(const BinaryFireMap& pred, const BinaryFireMap& target) {
  if (pred.width != target.width || pred.height != target.height) {
    throw DataError("classification_metrics: binary maps differ in size");
  }
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    const bool p = pred.bits[i], t = target.bits[i];
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
    tn += !p && !t;
  }
}

ClassificationMetrics classification_metrics(const Confusion& c) {
  const auto ratio = [&](double num, double den) {
    if (den == 0.0) return c.fn == 0 ? 1.0 : 0.0;
    return num / den;
  };
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp),
               fn = static_cast<double>(c.fn);
  return {ratio(tp, tp + fp), ratio(2.0 * tp, 2.0 * tp + fp + fn), ratio(tp, tp + fp + fn)};
}

ClassificationMetrics classification_metrics(const BinaryFireMap& pred, const BinaryFireMap& target) {
  Confusion c;
  c.add(pred, target);
  return classification_metrics(c);
}

}  // namespace firesr
