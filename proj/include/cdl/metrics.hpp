#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdl/coupled_model.hpp"
#include "cdl/depth_map.hpp"

namespace cdl {

/// Predictions below this are raised to it before the log and ratio
/// metrics.
inline constexpr double kDepthFloor = 1e-3;

struct MetricReport {
  double rmse = 0.0;
  double abs_rel = 0.0;
  double log10 = 0.0;
  double sc_inv = 0.0;
  double threshold_125 = 0.0;
  std::int64_t pixel_count = 0;
  std::int64_t clamped = 0;
};

/// "key: value" lines.
std::string format_report(const MetricReport& r);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x);
  void merge(const CompensatedSum& o);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Pixel-pooled accumulator. Adding pixel sets one by one and merging
/// accumulators of disjoint sets give the same report up to rounding.
class MetricAccumulator {
 public:
  void add(double pred, double gt);
  /// Every masked-in pixel of gt. Dims must match.
  void add(const DepthMap& pred, const DepthMap& gt);
  void merge(const MetricAccumulator& o);
  std::int64_t count() const { return n_; }
  MetricReport report() const;

 private:
  std::int64_t n_ = 0;
  std::int64_t below_ = 0;
  std::int64_t clamped_ = 0;
  CompensatedSum sq_, rel_, log10_;
  // Log-error mean and centered second moment, merged pairwise.
  double e_mean_ = 0.0;
  double e_m2_ = 0.0;
};

/// Metrics over the masked-in pixels of gt. Dims must match.
MetricReport evaluate(const DepthMap& pred, const DepthMap& gt);

/// Bilinear upsampling of pred to the ground-truth grid, then evaluate.
MetricReport evaluate_at_gt_resolution(const DepthMap& pred, const DepthMap& gt);

/// Per-pixel mean of the training depths (on the first one's grid) used as
/// the prediction for every test map, pooled over all test pixels.
MetricReport mean_prediction_baseline(const std::vector<DepthMap>& train,
                                      const std::vector<DepthMap>& test);

struct SweepPoint {
  Eigen::Index m = 0;
  double rmse = 0.0;
};

/// Reconstruction RMSE of the (mean-subtracted) coarse training depths
/// after sparse-coding-only training, for each dictionary size. Each size
/// starts from the previous dictionary with extra atoms grown from the
/// worst residuals, and a fixed lambda_w (resolved for the first size) is
/// used throughout.
std::vector<SweepPoint> dict_size_sweep(const std::vector<DepthMap>& depths,
                                        const std::vector<Eigen::Index>& sizes,
                                        const TrainConfig& cfg);

}  // namespace cdl
