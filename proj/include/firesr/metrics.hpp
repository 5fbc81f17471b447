#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "firesr/raster.hpp"

namespace firesr {

/// Half of one fire count in normalized units.
inline constexpr double kDefaultFireThreshold = 0.5 / 254.0;

struct ContinuousMetrics {
  double rmse = 0.0;
  std::optional<double> r2;  // empty when the pooled target variance is zero
  std::size_t n = 0;
};

/// Pools squared error and target moments over any number of rasters. The
/// target variance uses pairwise (Chan) merging, so the result does not depend
/// on how pixels are grouped into rasters.
class ContinuousAccumulator {
 public:
  void add(std::span<const double> pred, std::span<const double> target);
  void merge(const ContinuousAccumulator& other);
  ContinuousMetrics result() const;

 private:
  std::size_t n_ = 0;
  double sse_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

ContinuousMetrics continuous_metrics(const std::vector<Raster>& preds,
                                     const std::vector<Raster>& targets);

struct BinaryFireMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;
  double threshold = 0.0;

  std::size_t count() const;
};

/// A pixel is a fire pixel iff its value is strictly greater than the threshold.
BinaryFireMap binarize(const Raster& r, double threshold = kDefaultFireThreshold);

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  void add(const BinaryFireMap& pred, const BinaryFireMap& target);
  void merge(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
  }
};

struct ClassificationMetrics {
  double precision = 0.0;
  double f1 = 0.0;
  double threat = 0.0;
};

/// precision = TP/(TP+FP), f1 = 2TP/(2TP+FP+FN), threat = TP/(TP+FP+FN).
/// A zero denominator yields 1 when FN = 0 (nothing was missed) and 0 otherwise.
ClassificationMetrics classification_metrics(const Confusion& c);
ClassificationMetrics classification_metrics(const BinaryFireMap& pred, const BinaryFireMap& target);

}  // namespace firesr
